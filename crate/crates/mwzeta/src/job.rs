//! Batch job execution: parse a curve specification, run the full
//! pipeline, and serialize the result. Used by the command-line binary.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::basis::{compute_basis, Basis};
use crate::error::{Error, Result};
use crate::frobenius::{basis_length_required, frobenius_matrix, PrecisionPolicy};
use crate::isocrystal::Curve;
use crate::oracle::{self, Fq, FqElem};
use crate::padic::{teichmuller_lift, FieldSpec, KCoefficient, Ring, WittRing};
use crate::series::Center;
use crate::zeta::{charpoly_and_round, frobenius_norm, validate_weil, zeta_and_counts, ZetaResult};

/// A batch job. Field elements are little-endian integer coefficient
/// lists in the generator of F_q; exactly one of `lambdas` (the branch
/// points) and `q_poly` (the coefficients of Q, which must split with
/// distinct roots over F_q) is given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub p: u64,
    #[serde(default = "default_one")]
    pub n: usize,
    /// Monic degree-n modulus of F_q over F_p (generated deterministically
    /// from the job when absent and n > 1).
    #[serde(default)]
    pub modulus: Option<Vec<i64>>,
    #[serde(default)]
    pub lambdas: Option<Vec<Vec<u64>>>,
    #[serde(default, alias = "Q")]
    pub q_poly: Option<Vec<Vec<u64>>>,
    /// Analytic-precision override; implies explicit precision mode.
    #[serde(default)]
    pub p1: Option<usize>,
    /// p-adic precision override; implies explicit precision mode.
    #[serde(default)]
    pub p2: Option<usize>,
    /// Short, empirically validated precisions instead of the guaranteed
    /// bound (results are still checked against the Weil constraints).
    #[serde(default)]
    pub empirical_precision: bool,
    /// Compare counts against brute-force enumeration.
    #[serde(default)]
    pub verify: bool,
    #[serde(default = "default_r_max")]
    pub r_max: usize,
}

fn default_one() -> usize {
    1
}

fn default_r_max() -> usize {
    2
}

#[derive(Clone, Debug, Serialize)]
pub struct PrecisionsUsed {
    pub p1: usize,
    pub p2: usize,
    pub n_frob: usize,
    pub m_work: usize,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageTimings {
    pub setup_ms: u128,
    pub basis_ms: u128,
    pub frobenius_ms: u128,
    pub zeta_ms: u128,
    pub verify_ms: u128,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunOutput {
    pub q: u128,
    pub g: usize,
    pub result: ZetaResult,
    pub precisions_used: PrecisionsUsed,
    pub timings: StageTimings,
}

impl JobSpec {
    pub fn from_str_auto(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            serde_json::from_str(text)
                .map_err(|e| Error::InvalidInput(format!("bad JSON job: {e}")))
        } else {
            toml::from_str(text).map_err(|e| Error::InvalidInput(format!("bad TOML job: {e}")))
        }
    }

    /// Deterministic seed for any randomized search inside the run.
    pub fn seed(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.p.hash(&mut h);
        self.n.hash(&mut h);
        self.modulus.hash(&mut h);
        self.lambdas.hash(&mut h);
        self.q_poly.hash(&mut h);
        h.finish()
    }

    fn resolved_modulus(&self) -> Result<Vec<i64>> {
        if let Some(m) = &self.modulus {
            return Ok(m.clone());
        }
        if self.n == 1 {
            return Ok(vec![0, 1]);
        }
        if self.p < 3 || !crate::padic::is_prime_u64(self.p) {
            return Err(Error::InvalidInput(format!(
                "odd characteristic required, got p = {}",
                self.p
            )));
        }
        let fp = Fq::new(self.p, vec![0, 1]);
        let m = oracle::find_irreducible(&fp, self.n, self.seed());
        Ok(m.iter()
            .map(|c| c.first().copied().unwrap_or(0) as i64)
            .collect())
    }

    /// Branch-point residues: either given directly or the roots of Q.
    fn branch_points(&self, fq: &Fq) -> Result<Vec<FqElem>> {
        match (&self.lambdas, &self.q_poly) {
            (Some(_), Some(_)) | (None, None) => Err(Error::InvalidInput(
                "exactly one of lambdas and Q must be given".into(),
            )),
            (Some(ls), None) => {
                let out: Vec<FqElem> = ls
                    .iter()
                    .map(|c| fq_elem(fq, c))
                    .collect::<Result<_>>()?;
                check_distinct(&out)?;
                check_odd_count(out.len())?;
                Ok(out)
            }
            (None, Some(qc)) => {
                let q: Vec<FqElem> = qc
                    .iter()
                    .map(|c| fq_elem(fq, c))
                    .collect::<Result<_>>()?;
                let deg = q.len().saturating_sub(1);
                check_odd_count(deg)?;
                if q.last().map(|c| c != &fq.one()).unwrap_or(true) {
                    return Err(Error::InvalidInput("Q must be monic".into()));
                }
                // Q must split with distinct (rational) roots over F_q.
                let mut roots = Vec::new();
                for kx in 0..fq.q() {
                    let x = fq.element(kx);
                    let mut v = fq.zero();
                    for c in q.iter().rev() {
                        v = fq.add(&fq.mul(&v, &x), c);
                    }
                    if fq.is_zero(&v) {
                        roots.push(x);
                    }
                }
                if roots.len() != deg {
                    return Err(Error::InvalidInput(format!(
                        "ramification points not rational and distinct over F_q \
                         ({} simple roots found, degree {deg})",
                        roots.len()
                    )));
                }
                check_distinct(&roots)?;
                Ok(roots)
            }
        }
    }

    fn policy(&self, g: usize) -> PrecisionPolicy {
        match (self.p1, self.p2) {
            (Some(p1), Some(p2)) => PrecisionPolicy::explicit(self.p, p1, p2),
            (Some(p1), None) => {
                let mut pol = base_policy(self, g);
                pol.p1 = p1;
                pol
            }
            (None, Some(p2)) => {
                let base = base_policy(self, g);
                let mut pol = PrecisionPolicy::explicit(self.p, base.p1, p2);
                pol.alpha = base.alpha;
                pol.beta = base.beta;
                pol
            }
            (None, None) => base_policy(self, g),
        }
    }
}

fn base_policy(job: &JobSpec, g: usize) -> PrecisionPolicy {
    if job.empirical_precision {
        PrecisionPolicy::empirical(job.p, g, job.n, 8)
    } else {
        PrecisionPolicy::theoretical(job.p, g, job.n, 2)
    }
}

fn fq_elem(fq: &Fq, coords: &[u64]) -> Result<FqElem> {
    if coords.len() > fq.degree() {
        return Err(Error::InvalidInput(format!(
            "field element {coords:?} has more than n = {} coordinates",
            fq.degree()
        )));
    }
    let mut v = fq.zero();
    let gen: FqElem = vec![0, 1];
    for c in coords.iter().rev() {
        v = fq.add(&fq.mul(&v, &gen), &fq.from_u64(*c));
    }
    Ok(v)
}

fn check_distinct(pts: &[FqElem]) -> Result<()> {
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if pts[i] == pts[j] {
                return Err(Error::InvalidInput(
                    "ramification points not distinct".into(),
                ));
            }
        }
    }
    Ok(())
}

fn check_odd_count(len: usize) -> Result<()> {
    if len < 3 || len % 2 == 0 {
        return Err(Error::InvalidInput(format!(
            "need an odd number (>= 3) of branch points, got {len}"
        )));
    }
    Ok(())
}

/// Validate p, n, and the modulus up front; returns the field spec and
/// the matching residue field.
fn field_setup(job: &JobSpec) -> Result<(FieldSpec, Fq)> {
    let modulus = job.resolved_modulus()?;
    let spec = FieldSpec::new(job.p, job.n, modulus.clone())?;
    let fq = Fq::new(
        job.p,
        modulus
            .iter()
            .map(|&c| c.rem_euclid(job.p as i64) as u64)
            .collect(),
    );
    Ok((spec, fq))
}

fn build_curve(ring: &Ring, points: &[FqElem]) -> Result<Curve> {
    let lambdas: Vec<KCoefficient> = points
        .iter()
        .map(|res| KCoefficient::from_padic(&teichmuller_lift(ring, res, ring.m_cap)))
        .collect();
    Curve::new(ring, lambdas)
}

/// Run the full pipeline for one job.
pub fn run(job: &JobSpec) -> Result<RunOutput> {
    let t_setup = Instant::now();
    let (spec, fq) = field_setup(job)?;
    let points = job.branch_points(&fq)?;
    let g = (points.len() - 1) / 2;
    let pol = job.policy(g);
    let ring = WittRing::new(spec, pol.m_work);
    let q = fq.q();
    let curve = build_curve(&ring, &points)?;
    let setup_ms = t_setup.elapsed().as_millis();

    let t_basis = Instant::now();
    let basis = compute_basis(&curve, basis_length_required(job.p, g))?;
    let basis_ms = t_basis.elapsed().as_millis();

    let t_frob = Instant::now();
    let m = frobenius_matrix(&basis, &pol)?;
    let frobenius_ms = t_frob.elapsed().as_millis();

    let t_zeta = Instant::now();
    let nrm = frobenius_norm(&ring, &m, job.n);
    let a = charpoly_and_round(&ring, &nrm, q, g, pol.p2_target)?;
    let mut result = zeta_and_counts(&a, q, job.r_max.max(g));
    let zeta_ms = t_zeta.elapsed().as_millis();

    let t_verify = Instant::now();
    if job.verify {
        let qbar = qbar_from_points(&fq, &points);
        let mut counts = Vec::new();
        for r in 1..=job.r_max.max(1) {
            match oracle::count_points_naive(&fq, &qbar, r) {
                Ok(nr) => counts.push(nr),
                Err(Error::FieldTooLarge(_)) => break,
                Err(e) => return Err(e),
            }
        }
        result.validated = validate_weil(&result, Some(&counts));
    }
    let verify_ms = t_verify.elapsed().as_millis();

    Ok(RunOutput {
        q,
        g,
        result,
        precisions_used: PrecisionsUsed {
            p1: pol.p1,
            p2: pol.p2_target,
            n_frob: pol.n_frob,
            m_work: pol.m_work,
            alpha: pol.alpha,
            beta: pol.beta,
        },
        timings: StageTimings {
            setup_ms,
            basis_ms,
            frobenius_ms,
            zeta_ms,
            verify_ms,
        },
    })
}

fn qbar_from_points(fq: &Fq, points: &[FqElem]) -> Vec<FqElem> {
    let mut q = vec![fq.one()];
    for root in points {
        let mut next = vec![fq.zero(); q.len() + 1];
        for (i, c) in q.iter().enumerate() {
            next[i + 1] = fq.add(&next[i + 1], c);
            next[i] = fq.sub(&next[i], &fq.mul(c, root));
        }
        q = next;
    }
    q
}

/// Serialized p-adic coefficient: p^val * mantissa + O(p^prec), mantissa
/// given by its Witt-vector coordinate list.
#[derive(Clone, Debug, Serialize)]
pub struct CoefficientDump {
    pub val: i64,
    pub prec: i64,
    pub mantissa: Vec<String>,
}

fn dump_coeff(ring: &Ring, c: &KCoefficient) -> CoefficientDump {
    match c.valuation() {
        None => CoefficientDump {
            val: 0,
            prec: c.precision(),
            mantissa: vec![],
        },
        Some(v) => {
            let unit = c.shift_val(-v);
            let pe = unit.to_padic().expect("unit mantissa");
            CoefficientDump {
                val: v,
                prec: c.precision(),
                mantissa: (0..ring.n()).map(|i| pe.coeff(i).to_string()).collect(),
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BasisElementDump {
    /// Local constants g(lambda) per center, infinity last.
    pub constants: Vec<CoefficientDump>,
    /// Analytic expansions, center-major, coefficients 0..len.
    pub expansions: Vec<Vec<CoefficientDump>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BasisDump {
    pub centers: Vec<String>,
    pub dimension: usize,
    /// Constant tuples (Y^0 block then Y^1 block) of the 4g+1 seed
    /// solutions of the degree-1 system.
    pub seeds: Vec<Vec<CoefficientDump>>,
    /// The 2g Y^1 classes spanning the curve part of the cohomology.
    pub y_classes: Vec<BasisElementDump>,
}

/// Serialize the cohomology basis of the job's curve.
pub fn emit_basis(job: &JobSpec) -> Result<BasisDump> {
    let (spec, fq) = field_setup(job)?;
    let points = job.branch_points(&fq)?;
    let g = (points.len() - 1) / 2;
    let pol = job.policy(g);
    let ring = WittRing::new(spec, pol.m_work);
    let curve = build_curve(&ring, &points)?;
    let len = basis_length_required(job.p, g);
    let basis: Basis = compute_basis(&curve, len)?;
    let seeds = crate::basis::filter_solutions(
        &curve,
        &crate::basis::solve_global(&curve, 1)?.vectors,
        1,
    )?;
    let centers: Vec<String> = curve
        .centers()
        .iter()
        .map(|c| match c {
            Center::Infinity => "infinity".to_string(),
            Center::Finite(l) => {
                // label by the residue of the branch point
                let res = l
                    .to_padic()
                    .map(|pe| pe.residue())
                    .unwrap_or_default();
                res.iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            }
        })
        .collect();
    Ok(BasisDump {
        centers,
        dimension: seeds.len(),
        seeds: seeds
            .iter()
            .map(|s| s.constants.iter().map(|c| dump_coeff(&ring, c)).collect())
            .collect(),
        y_classes: basis
            .y_consts
            .iter()
            .zip(&basis.y_parts)
            .map(|(consts, parts)| BasisElementDump {
                constants: consts.iter().map(|c| dump_coeff(&ring, c)).collect(),
                expansions: parts
                    .iter()
                    .map(|part| {
                        (0..part.hi().max(0))
                            .map(|e| dump_coeff(&ring, &part.get(e)))
                            .collect()
                    })
                    .collect(),
            })
            .collect(),
    })
}

/// Exit-code classification used by the binary.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::InvalidInput(_) | Error::CoincidentCenters | Error::FieldTooLarge(_) => 2,
        Error::PrecisionExhausted(_)
        | Error::CoefficientOutOfWeilRange { .. }
        | Error::SingularDecomposition
        | Error::GrowthBoundViolation { .. }
        | Error::PoleOrderTooLarge(_)
        | Error::InsufficientAnalyticPrecision => 3,
        _ => 3,
    }
}
