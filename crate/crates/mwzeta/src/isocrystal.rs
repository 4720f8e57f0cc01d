//! The compact-support module attached to y^2 = Q(t) and the global linear
//! system whose kernel gives local expansions of cohomology classes.
//!
//! An element is a tuple of local power series, one pair (Y^0, Y^1 part)
//! per center lambda_1, ..., lambda_{2g+1}, infinity (always ordered with
//! infinity last). At infinity the parameter is u = 1/t and the constant
//! term is zero by convention. The Gauss-Manin connection acts through the
//! single rational function h = Q'/(2Q) on the Y-part; the horizontality
//! equation dg/dt + h g = (principal-part corrections) is encoded, level n
//! by level n, as (M_n + D_n) v = 0 on coefficient vectors.

use crate::error::{Error, Result};
use crate::linalg::KMatrix;
use crate::padic::{KCoefficient, Ring};
use crate::series::{reexpand_base, reexpand_principal, Center, Laurent};

#[derive(Clone)]
pub struct Curve {
    pub ring: Ring,
    pub g: usize,
    /// The 2g+1 Teichmueller-lifted roots of Q, pairwise distinct mod p.
    pub lambdas: Vec<KCoefficient>,
}

impl Curve {
    pub fn new(ring: &Ring, lambdas: Vec<KCoefficient>) -> Result<Self> {
        if lambdas.len() < 3 || lambdas.len() % 2 == 0 {
            return Err(Error::InvalidInput(
                "need an odd number 2g+1 >= 3 of branch points".into(),
            ));
        }
        for i in 0..lambdas.len() {
            for j in 0..i {
                let d = lambdas[i].sub(&lambdas[j]);
                if d.valuation() != Some(0) {
                    return Err(Error::CoincidentCenters);
                }
            }
        }
        let g = (lambdas.len() - 1) / 2;
        Ok(Curve {
            ring: ring.clone(),
            g,
            lambdas,
        })
    }

    /// Finite centers in input order, then infinity.
    pub fn centers(&self) -> Vec<Center> {
        let mut v: Vec<Center> = self.lambdas.iter().cloned().map(Center::Finite).collect();
        v.push(Center::Infinity);
        v
    }

    pub fn num_centers(&self) -> usize {
        self.lambdas.len() + 1
    }

    pub fn infinity_index(&self) -> usize {
        self.lambdas.len()
    }

    /// Local expansion of h = Q'/(2Q) = (1/2) sum_i (t - lambda_i)^{-1} at
    /// the center with index ci, on the window [-1, len-1]. At infinity the
    /// expansion has no pole (h ~ (2g+1)/(2t)), so the entries at exponents
    /// -1 and 0 are exactly zero there.
    pub fn h_at(&self, ci: usize, len: usize) -> Result<Laurent> {
        let ring = &self.ring;
        let half = KCoefficient::from_ratio(ring, 1, 2);
        let centers = self.centers();
        let target = &centers[ci];
        let mut out = Laurent::zero_window(ring, -1, len + 1);
        match target {
            Center::Finite(_) => {
                out.set(-1, half.clone());
                for (j, lj) in self.lambdas.iter().enumerate() {
                    if j == ci {
                        continue;
                    }
                    let base = reexpand_base(ring, &Center::Finite(lj.clone()), target, len)?;
                    for e in 0..(len as i64) {
                        let cur = out.get(e);
                        out.set(e, cur.add(&half.mul(&base.get(e))));
                    }
                }
            }
            Center::Infinity => {
                for lj in &self.lambdas {
                    let base =
                        reexpand_base(ring, &Center::Finite(lj.clone()), &Center::Infinity, len)?;
                    for e in 1..=(len as i64) {
                        if e < out.hi() {
                            let cur = out.get(e);
                            out.set(e, cur.add(&half.mul(&base.get(e))));
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Coefficient-vector layout
// ---------------------------------------------------------------------------

/// Index into a stacked coefficient vector: per center, first the Y^0
/// coefficients 0..l_per, then the Y^1 coefficients.
pub fn slot(ci: usize, y: usize, l: usize, l_per: usize) -> usize {
    ci * 2 * l_per + y * l_per + l
}

/// An element of the module, as analytic local expansions.
#[derive(Clone)]
pub struct CscElement {
    /// parts[ci] = [Y^0 part, Y^1 part]; windows start at 0 (finite) resp.
    /// contain a zero constant slot (infinity).
    pub parts: Vec<[Laurent; 2]>,
}

impl CscElement {
    pub fn zero(curve: &Curve, len: usize) -> Self {
        let parts = (0..curve.num_centers())
            .map(|_| {
                [
                    Laurent::zero_window(&curve.ring, 0, len),
                    Laurent::zero_window(&curve.ring, 0, len),
                ]
            })
            .collect();
        CscElement { parts }
    }

    /// Stack the first l_per coefficients (exponents 0..l_per) of every
    /// part; exponents outside a part's window read as zero.
    pub fn vectorize(&self, ring: &Ring, l_per: usize) -> Vec<KCoefficient> {
        let mut v = vec![KCoefficient::zero(ring, ring.m_cap as i64); self.parts.len() * 2 * l_per];
        for (ci, pair) in self.parts.iter().enumerate() {
            for (y, part) in pair.iter().enumerate() {
                for l in 0..l_per {
                    let e = l as i64;
                    if e >= part.offset && e < part.hi() {
                        v[slot(ci, y, l, l_per)] = part.get(e);
                    }
                }
            }
        }
        v
    }

    pub fn devectorize(curve: &Curve, v: &[KCoefficient], l_per: usize) -> Self {
        let mut elem = CscElement::zero(curve, l_per);
        for ci in 0..curve.num_centers() {
            for y in 0..2 {
                for l in 0..l_per {
                    elem.parts[ci][y].set(l as i64, v[slot(ci, y, l, l_per)].clone());
                }
            }
        }
        elem
    }
}

// ---------------------------------------------------------------------------
// The matrices M_n and D_n
// ---------------------------------------------------------------------------

/// M_n: the action of the connection coefficient h on Y-parts, with the
/// principal parts redistributed to the other centers. Size
/// 2(n+1)(2g+2) x 2(n+2)(2g+2); rows are analytic coefficients 0..n of the
/// image, columns coefficients 0..n+1 of the argument. Only (Y^1, Y^1)
/// blocks are nonzero.
pub fn multiplication_matrix(curve: &Curve, n: usize) -> Result<KMatrix> {
    let ring = &curve.ring;
    let nc = curve.num_centers();
    let lr = n + 1;
    let lc = n + 2;
    let rows = 2 * lr * nc;
    let cols = 2 * lc * nc;
    let zero = || KCoefficient::zero(ring, ring.m_cap as i64);
    let mut m: KMatrix = (0..rows).map(|_| (0..cols).map(|_| zero()).collect()).collect();
    let inf = curve.infinity_index();
    let centers = curve.centers();
    // Diagonal blocks: multiplication by S_{h,lambda}, analytic rows only.
    // With the pole order 1, column l of the argument contributes
    // a_{1+i-l} to row i, where S_h = a_0 s^{-1} + a_1 + a_2 s + ...
    for ci in 0..nc {
        let h = curve.h_at(ci, n + 2)?;
        for i in 0..lr {
            for l in 0..lc {
                if ci == inf && (i == 0 || l == 0) {
                    continue;
                }
                let k = 1 + i as i64 - l as i64;
                if k < 0 {
                    continue;
                }
                let e = k - 1; // exponent in the local parameter
                if e >= h.offset && e < h.hi() {
                    m[slot(ci, 1, i, lr)][slot(ci, 1, l, lc)] = h.get(e);
                }
            }
        }
    }
    // Off-diagonal blocks: minus the expansion at the target of the
    // principal part of S_{h,source} * (argument column). Only the
    // constant column of the argument meets the simple pole.
    for tgt in 0..nc {
        for src in 0..nc {
            if src == tgt {
                continue;
            }
            let h_src = curve.h_at(src, 2)?;
            if src != inf {
                // principal part of h at the source: a_0 s^{-1}
                let a0 = h_src.get(-1);
                if a0.is_zero() {
                    continue;
                }
                let base = reexpand_base(ring, &centers[src], &centers[tgt], lr + 1)?;
                for i in 0..lr {
                    if tgt == inf && i == 0 {
                        continue; // constant term at infinity is dropped
                    }
                    let e = i as i64;
                    let val = if e >= base.offset && e < base.hi() {
                        base.get(e)
                    } else {
                        zero()
                    };
                    m[slot(tgt, 1, i, lr)][slot(src, 1, 0, lc)] = a0.mul(&val).neg();
                }
            } else {
                // Source at infinity: principal part is a_0 u^{-1} + a_1,
                // i.e. the polynomial a_0 t + a_1; columns 0 and 1 of the
                // argument produce eta^1 and eta^0 respectively. For the
                // hyperelliptic connection a_0 = a_1 = 0 and these vanish,
                // but we keep the general formula.
                let a0 = h_src.get(-1);
                let a1 = h_src.get(0);
                if a0.is_zero() && a1.is_zero() {
                    continue;
                }
                let Center::Finite(lt) = &centers[tgt] else {
                    continue;
                };
                // expansion of t at the finite target: lt + s
                for (col, with_const) in [(0usize, true), (1usize, false)] {
                    // eta^{1} includes a_1, eta^{0} does not
                    let mut coeffs = vec![zero(); lr];
                    coeffs[0] = a0.mul(lt);
                    if lr > 1 {
                        coeffs[1] = a0.clone();
                    }
                    if with_const {
                        coeffs[0] = coeffs[0].add(&a1);
                    }
                    for i in 0..lr {
                        m[slot(tgt, 1, i, lr)][slot(src, 1, col, lc)] = coeffs[i].neg();
                    }
                }
            }
        }
    }
    Ok(m)
}

/// D_n: coefficientwise d/dt, block diagonal over centers and Y-parities.
/// At a finite center, row i picks (i+1) b_{i+1}; at infinity d/dt =
/// -u^2 d/du sends b_l u^l to -l b_l u^{l+1}, so row i picks -(i-1) b_{i-1}.
pub fn derivative_matrix(curve: &Curve, n: usize) -> KMatrix {
    let ring = &curve.ring;
    let nc = curve.num_centers();
    let lr = n + 1;
    let lc = n + 2;
    let zero = || KCoefficient::zero(ring, ring.m_cap as i64);
    let mut m: KMatrix = (0..2 * lr * nc)
        .map(|_| (0..2 * lc * nc).map(|_| zero()).collect())
        .collect();
    let inf = curve.infinity_index();
    for ci in 0..nc {
        for y in 0..2 {
            for i in 0..lr {
                if ci != inf {
                    m[slot(ci, y, i, lr)][slot(ci, y, i + 1, lc)] =
                        KCoefficient::from_i64(ring, (i + 1) as i64);
                } else if i >= 1 {
                    m[slot(ci, y, i, lr)][slot(ci, y, i - 1, lc)] =
                        KCoefficient::from_i64(ring, -((i - 1) as i64));
                }
            }
        }
    }
    m
}

/// M_n + D_n.
pub fn system_matrix(curve: &Curve, n: usize) -> Result<KMatrix> {
    let mut m = multiplication_matrix(curve, n)?;
    let d = derivative_matrix(curve, n);
    for (mr, dr) in m.iter_mut().zip(&d) {
        for (me, de) in mr.iter_mut().zip(dr) {
            *me = me.add(de);
        }
    }
    Ok(m)
}

// ---------------------------------------------------------------------------
// Module action (multiplication by the connection coefficient followed by
// redistribution of principal parts)
// ---------------------------------------------------------------------------

/// Apply the Y-part of the connection matrix to an element: at each center
/// multiply the Y^1 part by S_{h,lambda}, keep the analytic part, and
/// subtract from every center the local expansion of the principal parts
/// arising at the other centers. Returns the Y^1 parts with n_out + 1
/// coefficients (exponents 0..n_out); the Y^0 image is zero.
pub fn module_action_y(curve: &Curve, y_parts: &[Laurent], n_out: usize) -> Result<Vec<Laurent>> {
    let ring = &curve.ring;
    let nc = curve.num_centers();
    let inf = curve.infinity_index();
    let centers = curve.centers();
    assert_eq!(y_parts.len(), nc);
    // Products with full windows.
    let mut analytic: Vec<Laurent> = Vec::with_capacity(nc);
    let mut principal: Vec<Laurent> = Vec::with_capacity(nc);
    for ci in 0..nc {
        let h = curve.h_at(ci, (n_out + 2).max(y_parts[ci].coeffs.len()))?;
        let prod = h.mul(&y_parts[ci]);
        // At infinity the principal part includes the constant term
        // (polynomials in t); at finite centers it is exponents < 0.
        let e0 = if ci == inf { 1 } else { 0 };
        let split = e0.min(prod.hi()).max(prod.offset);
        principal.push(prod.restrict(prod.offset, split));
        analytic.push(prod.restrict(split, prod.hi()));
    }
    let mut out = Vec::with_capacity(nc);
    for ci in 0..nc {
        let e0: i64 = if ci == inf { 1 } else { 0 };
        let mut res = Laurent::zero_window(ring, 0, n_out + 1);
        for l in e0..=(n_out as i64) {
            if l >= analytic[ci].offset && l < analytic[ci].hi() {
                res.set(l, analytic[ci].get(l));
            } else if l >= analytic[ci].hi() {
                return Err(Error::InsufficientAnalyticPrecision);
            }
        }
        for cj in 0..nc {
            if cj == ci || principal[cj].is_zero() {
                continue;
            }
            // Separate a possible constant term (infinity source only).
            let (pp, cst) = if principal[cj].hi() > 0 {
                (
                    principal[cj].restrict(principal[cj].offset, 0),
                    principal[cj].get(0),
                )
            } else {
                (
                    principal[cj].clone(),
                    KCoefficient::zero(ring, ring.m_cap as i64),
                )
            };
            if !pp.coeffs.is_empty() {
                let exp = reexpand_principal(&pp, &centers[cj], &centers[ci], n_out + 1)?;
                for l in e0..=(n_out as i64) {
                    if l >= exp.offset && l < exp.hi() {
                        let cur = res.get(l);
                        res.set(l, cur.sub(&exp.get(l)));
                    }
                }
            }
            if !cst.is_zero() && ci != inf {
                let cur = res.get(0);
                res.set(0, cur.sub(&cst));
            }
        }
        out.push(res);
    }
    Ok(out)
}
