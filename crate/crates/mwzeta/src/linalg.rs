//! Dense linear algebra over K = Frac(W(F_q)) with precision-aware pivoting.
//!
//! Gaussian elimination picks the remaining entry of minimal valuation as
//! the pivot, which minimises the p-adic precision lost when dividing rows.
//! An entry that is indistinguishable from zero at very low precision is a
//! sign that upstream precision was too small, and aborts the elimination.

use crate::error::{Error, Result};
use crate::padic::{KCoefficient, Ring};

pub type KMatrix = Vec<Vec<KCoefficient>>;

pub struct Echelon {
    pub mat: KMatrix,
    /// (row, col) of each pivot, in elimination order.
    pub pivots: Vec<(usize, usize)>,
    /// Total valuation of all pivots; this is the worst-case absolute
    /// precision lost by the elimination.
    pub valuation_loss: i64,
}

/// Minimum absolute precision at which we are willing to declare an entry
/// zero during pivoting.
const ZERO_FLOOR: i64 = 1;

/// Row-reduce in place to (unreduced) row echelon form with full pivoting
/// by minimal valuation.
pub fn row_echelon(mut a: KMatrix) -> Result<Echelon> {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut pivots: Vec<(usize, usize)> = vec![];
    let mut used_rows = vec![false; rows];
    let mut used_cols = vec![false; cols];
    let mut loss = 0i64;
    loop {
        // Find the not-yet-eliminated entry of minimal valuation.
        let mut best: Option<(i64, usize, usize)> = None;
        for i in 0..rows {
            if used_rows[i] {
                continue;
            }
            for j in 0..cols {
                if used_cols[j] {
                    continue;
                }
                let e = &a[i][j];
                match e.valuation() {
                    None => {
                        if e.precision() < ZERO_FLOOR {
                            return Err(Error::PrecisionExhausted(format!(
                                "entry ({i},{j}) is O(p^{}) during elimination",
                                e.precision()
                            )));
                        }
                    }
                    Some(v) => {
                        if best.map_or(true, |(bv, _, _)| v < bv) {
                            best = Some((v, i, j));
                        }
                    }
                }
            }
        }
        let Some((v, pi, pj)) = best else { break };
        loss += v;
        used_rows[pi] = true;
        used_cols[pj] = true;
        pivots.push((pi, pj));
        let pinv = a[pi][pj].inv()?;
        for i in 0..rows {
            if used_rows[i] || a[i][pj].is_zero() {
                continue;
            }
            let factor = a[i][pj].mul(&pinv);
            for j in 0..cols {
                if used_cols[j] && j != pj {
                    continue;
                }
                let sub = factor.mul(&a[pi][j]);
                a[i][j] = a[i][j].sub(&sub);
            }
            // Entry under the pivot is now zero by construction.
            a[i][pj] = KCoefficient::zero(&a[i][pj].ring.clone(), a[i][pj].precision());
        }
    }
    Ok(Echelon {
        mat: a,
        pivots,
        valuation_loss: loss,
    })
}

pub struct KernelBasis {
    pub vectors: Vec<Vec<KCoefficient>>,
    pub valuation_loss: i64,
}

/// Basis of the right kernel of a (rows x cols) matrix.
pub fn kernel(ring: &Ring, a: KMatrix, cols: usize, prec_abs: i64) -> Result<KernelBasis> {
    let ech = row_echelon(a)?;
    let pivot_cols: Vec<usize> = ech.pivots.iter().map(|&(_, c)| c).collect();
    let free_cols: Vec<usize> = (0..cols).filter(|c| !pivot_cols.contains(c)).collect();
    let mut vectors = vec![];
    for &fc in &free_cols {
        let mut v: Vec<KCoefficient> = (0..cols).map(|_| KCoefficient::zero(ring, prec_abs)).collect();
        v[fc] = KCoefficient::from_i64(ring, 1).truncate_abs(prec_abs);
        // Back-substitute through the pivots in reverse elimination order.
        for &(pr, pc) in ech.pivots.iter().rev() {
            // row pr: sum_j mat[pr][j] v[j] = 0 => solve for v[pc]
            let mut acc = KCoefficient::zero(ring, i64::MAX / 2);
            for j in 0..cols {
                if j == pc || v[j].is_zero() {
                    continue;
                }
                acc = acc.add(&ech.mat[pr][j].mul(&v[j]));
            }
            v[pc] = acc.neg().div(&ech.mat[pr][pc])?;
        }
        vectors.push(v);
    }
    Ok(KernelBasis {
        vectors,
        valuation_loss: ech.valuation_loss,
    })
}

/// Solve A x = b for a (possibly overdetermined) consistent system with
/// unique solution. Errors with SingularDecomposition if the system is
/// underdetermined or inconsistent at the tracked precision.
pub fn solve(ring: &Ring, a: &KMatrix, b: &[KCoefficient]) -> Result<Vec<KCoefficient>> {
    let rows = a.len();
    assert_eq!(rows, b.len());
    let cols = if rows == 0 { 0 } else { a[0].len() };
    // Augment with b and reduce; forbid pivoting in the last column by
    // eliminating on the coefficient block only.
    let mut aug: KMatrix = a.clone();
    for (i, row) in aug.iter_mut().enumerate() {
        row.push(b[i].clone());
    }
    let rowsn = aug.len();
    let mut pivots: Vec<(usize, usize)> = vec![];
    let mut used_rows = vec![false; rowsn];
    let mut used_cols = vec![false; cols];
    loop {
        let mut best: Option<(i64, usize, usize)> = None;
        for i in 0..rowsn {
            if used_rows[i] {
                continue;
            }
            for j in 0..cols {
                if used_cols[j] {
                    continue;
                }
                if let Some(v) = aug[i][j].valuation() {
                    if best.map_or(true, |(bv, _, _)| v < bv) {
                        best = Some((v, i, j));
                    }
                }
            }
        }
        let Some((_, pi, pj)) = best else { break };
        used_rows[pi] = true;
        used_cols[pj] = true;
        pivots.push((pi, pj));
        let pinv = aug[pi][pj].inv()?;
        for i in 0..rowsn {
            if i == pi || aug[i][pj].is_zero() {
                continue;
            }
            let factor = aug[i][pj].mul(&pinv);
            for j in 0..=cols {
                let sub = factor.mul(&aug[pi][j]);
                aug[i][j] = aug[i][j].sub(&sub);
            }
            aug[i][pj] = KCoefficient::zero(ring, aug[i][pj].precision());
        }
    }
    if pivots.len() < cols {
        return Err(Error::SingularDecomposition);
    }
    // Rows without pivots must have zero residual in the augmented column.
    for i in 0..rowsn {
        if !used_rows[i] && !aug[i][cols].is_zero() {
            return Err(Error::SingularDecomposition);
        }
    }
    let mut x: Vec<KCoefficient> = (0..cols)
        .map(|_| KCoefficient::zero(ring, i64::MAX / 2))
        .collect();
    for &(pi, pj) in &pivots {
        x[pj] = aug[pi][cols].div(&aug[pi][pj])?;
    }
    Ok(x)
}

/// Rank at the tracked precision.
pub fn rank(a: KMatrix) -> Result<usize> {
    Ok(row_echelon(a)?.pivots.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::{FieldSpec, WittRing};

    fn ring() -> Ring {
        WittRing::new(FieldSpec::prime_field(5).unwrap(), 12)
    }

    fn k(r: &Ring, num: i64, den: i64) -> KCoefficient {
        KCoefficient::from_ratio(r, num, den)
    }

    #[test]
    fn kernel_of_rank_one_matrix() {
        let r = ring();
        // [1 2 3; 2 4 6] has kernel dim 2
        let a = vec![
            vec![k(&r, 1, 1), k(&r, 2, 1), k(&r, 3, 1)],
            vec![k(&r, 2, 1), k(&r, 4, 1), k(&r, 6, 1)],
        ];
        let kb = kernel(&r, a.clone(), 3, 10).unwrap();
        assert_eq!(kb.vectors.len(), 2);
        for v in &kb.vectors {
            for row in &a {
                let mut acc = KCoefficient::zero(&r, 100);
                for (c, x) in row.iter().zip(v) {
                    acc = acc.add(&c.mul(x));
                }
                assert!(acc.is_zero());
            }
        }
    }

    #[test]
    fn pivoting_prefers_units_over_p_multiples() {
        let r = ring();
        // [5 1; 1 0]: min-valuation pivot is the unit 1, so no precision
        // should be lost.
        let a = vec![
            vec![k(&r, 5, 1), k(&r, 1, 1)],
            vec![k(&r, 1, 1), k(&r, 0, 1)],
        ];
        let ech = row_echelon(a).unwrap();
        assert_eq!(ech.valuation_loss, 0);
        assert_eq!(ech.pivots.len(), 2);
    }

    #[test]
    fn solve_unique_overdetermined() {
        let r = ring();
        // x = 3/2, y = -1/5 satisfying 3 consistent equations.
        let a = vec![
            vec![k(&r, 2, 1), k(&r, 5, 1)],
            vec![k(&r, 0, 1), k(&r, 10, 1)],
            vec![k(&r, 4, 1), k(&r, 0, 1)],
        ];
        let b = vec![k(&r, 2, 1), k(&r, -2, 1), k(&r, 6, 1)];
        let x = solve(&r, &a, &b).unwrap();
        assert!(x[0].eq_to_prec(&k(&r, 3, 2).truncate_abs(x[0].precision())));
        assert!(x[1].eq_to_prec(&k(&r, -1, 5).truncate_abs(x[1].precision())));
    }

    #[test]
    fn solve_detects_inconsistency() {
        let r = ring();
        let a = vec![vec![k(&r, 1, 1)], vec![k(&r, 1, 1)]];
        let b = vec![k(&r, 1, 1), k(&r, 2, 1)];
        assert!(matches!(
            solve(&r, &a, &b),
            Err(crate::error::Error::SingularDecomposition)
        ));
    }
}
