//! Error type shared by all stages of the pipeline.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("p-adic precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("division by a non-unit p-adic element")]
    DivisionByNonUnit,
    #[error("series centers do not match")]
    CenterMismatch,
    #[error("series has a non-unit constant term, cannot invert")]
    NonUnitConstantTerm,
    #[error("series constant term is not 1 mod p, cannot take square root")]
    BadConstantTerm,
    #[error("pole order {0} too large for local expansion")]
    PoleOrderTooLarge(usize),
    #[error("cannot re-expand a pole around its own center")]
    CoincidentCenters,
    #[error("indicial obstruction in coefficient recurrence: {0}")]
    IndicialObstruction(String),
    #[error("requested analytic precision exceeds available coefficients")]
    InsufficientAnalyticPrecision,
    #[error("cohomology dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("growth bound violated at coefficient {index}: valuation {valuation} < bound {bound}")]
    GrowthBoundViolation {
        index: usize,
        valuation: i64,
        bound: f64,
    },
    #[error("singular decomposition system (insufficient p-adic precision upstream)")]
    SingularDecomposition,
    #[error("rounded coefficient a_{index} = {value} exceeds its Weil bound")]
    CoefficientOutOfWeilRange { index: usize, value: String },
    #[error("point counts are inconsistent with a Weil polynomial")]
    InconsistentCounts,
    #[error("field of size {0} too large for naive enumeration")]
    FieldTooLarge(u128),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
