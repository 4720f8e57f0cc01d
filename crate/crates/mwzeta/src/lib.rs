//! Zeta functions of hyperelliptic curves y^2 = Q(x) over F_q (q odd) via
//! the Frobenius action on rigid cohomology with compact support.

pub mod basis;
pub mod error;
pub mod frobenius;
pub mod isocrystal;
pub mod job;
pub mod linalg;
pub mod oracle;
pub mod padic;
pub mod series;
pub mod zeta;

pub use error::{Error, Result};
