//! Exact arithmetic in W(F_q)/p^M for q = p^n, p odd, together with the
//! fraction-field coefficients used everywhere else in the pipeline.
//!
//! Elements of W(F_q) are polynomials of degree < n over Z/p^M reduced
//! modulo a monic lift of an irreducible degree-n polynomial over F_p.
//! Fraction-field coefficients are stored as p^v * mantissa with a unit
//! mantissa and an explicit absolute precision that is never silently
//! increased.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Counts "zero to tracked precision" decisions taken at suspiciously low
/// absolute precision (below 1 digit). Tests snapshot this to detect
/// precision-starved runs.
static AMBIGUOUS_ZERO_DECISIONS: AtomicU64 = AtomicU64::new(0);

pub fn ambiguous_zero_count() -> u64 {
    AMBIGUOUS_ZERO_DECISIONS.load(Ordering::Relaxed)
}

fn note_ambiguous_zero() {
    AMBIGUOUS_ZERO_DECISIONS.fetch_add(1, Ordering::Relaxed);
}

// ---------------------------------------------------------------------------
// F_p[x] helpers (u64 arithmetic, used for validation and mod-p inversion)
// ---------------------------------------------------------------------------

pub(crate) mod fp {
    /// Trim trailing zeros.
    pub fn norm(mut a: Vec<u64>) -> Vec<u64> {
        while a.last() == Some(&0) {
            a.pop();
        }
        a
    }

    pub fn mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
        if a.is_empty() || b.is_empty() {
            return vec![];
        }
        let mut out = vec![0u64; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                out[i + j] = (out[i + j] + (x as u128 * y as u128 % p as u128) as u64) % p;
            }
        }
        norm(out)
    }

    pub fn rem(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
        let mut a = a.to_vec();
        let dm = m.len() - 1;
        let lead_inv = inv_scalar(m[dm], p);
        while a.len() > dm {
            let d = a.len() - 1;
            let c = (a[d] as u128 * lead_inv as u128 % p as u128) as u64;
            if c != 0 {
                for i in 0..=dm {
                    let t = (c as u128 * m[i] as u128 % p as u128) as u64;
                    a[d - dm + i] = (a[d - dm + i] + p - t) % p;
                }
            }
            a.pop();
            a = norm(a);
            if a.is_empty() {
                break;
            }
        }
        norm(a)
    }

    pub fn mulmod(a: &[u64], b: &[u64], m: &[u64], p: u64) -> Vec<u64> {
        rem(&mul(a, b, p), m, p)
    }

    pub fn powmod(a: &[u64], mut e: u128, m: &[u64], p: u64) -> Vec<u64> {
        let mut base = rem(a, m, p);
        let mut acc = vec![1u64];
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(&acc, &base, m, p);
            }
            base = mulmod(&base, &base, m, p);
            e >>= 1;
        }
        acc
    }

    pub fn inv_scalar(a: u64, p: u64) -> u64 {
        // Fermat; p prime.
        let mut e = p - 2;
        let mut base = a % p;
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = (acc as u128 * base as u128 % p as u128) as u64;
            }
            base = (base as u128 * base as u128 % p as u128) as u64;
            e >>= 1;
        }
        acc
    }

    /// Inverse of a modulo m in F_p[x], via extended Euclid.
    pub fn invmod(a: &[u64], m: &[u64], p: u64) -> Option<Vec<u64>> {
        let (mut r0, mut r1) = (m.to_vec(), rem(a, m, p));
        let (mut s0, mut s1) = (vec![], vec![1u64]);
        while !r1.is_empty() {
            // r0 = q r1 + r
            let (q, r) = divrem(&r0, &r1, p);
            let s = sub(&s0, &mul(&q, &s1, p), p);
            r0 = r1;
            r1 = r;
            s0 = s1;
            s1 = s;
        }
        if r0.len() != 1 {
            return None; // gcd not a unit
        }
        let c = inv_scalar(r0[0], p);
        Some(norm(s0.iter().map(|&x| (x as u128 * c as u128 % p as u128) as u64).collect()))
    }

    pub fn sub(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
        let n = a.len().max(b.len());
        let mut out = vec![0u64; n];
        for i in 0..n {
            let x = a.get(i).copied().unwrap_or(0);
            let y = b.get(i).copied().unwrap_or(0);
            out[i] = (x + p - y) % p;
        }
        norm(out)
    }

    pub fn divrem(a: &[u64], b: &[u64], p: u64) -> (Vec<u64>, Vec<u64>) {
        let mut r = a.to_vec();
        let db = b.len() - 1;
        let mut q = vec![0u64; a.len().saturating_sub(db)];
        let lead_inv = inv_scalar(b[db], p);
        while r.len() > db {
            let d = r.len() - 1;
            let c = (r[d] as u128 * lead_inv as u128 % p as u128) as u64;
            q[d - db] = c;
            if c != 0 {
                for i in 0..=db {
                    let t = (c as u128 * b[i] as u128 % p as u128) as u64;
                    r[d - db + i] = (r[d - db + i] + p - t) % p;
                }
            }
            r.pop();
            r = norm(r);
        }
        (norm(q), norm(r))
    }

    pub fn is_irreducible(f: &[u64], p: u64) -> bool {
        let n = f.len() - 1;
        if n == 0 {
            return false;
        }
        let x = vec![0u64, 1];
        // x^{p^n} == x mod f
        let mut xp = x.clone();
        for _ in 0..n {
            xp = powmod(&xp, p as u128, f, p);
        }
        if norm(sub(&xp, &rem(&x, f, p), p)) != Vec::<u64>::new() {
            return false;
        }
        // gcd(x^{p^{n/ell}} - x, f) = 1 for prime divisors ell of n
        let mut d = n;
        let mut primes = vec![];
        let mut k = 2;
        while k * k <= d {
            if d % k == 0 {
                primes.push(k);
                while d % k == 0 {
                    d /= k;
                }
            }
            k += 1;
        }
        if d > 1 {
            primes.push(d);
        }
        for ell in primes {
            let m = n / ell;
            let mut xq = x.clone();
            for _ in 0..m {
                xq = powmod(&xq, p as u128, f, p);
            }
            let g = gcd(&sub(&xq, &rem(&x, f, p), p), f, p);
            if g.len() != 1 {
                return false;
            }
        }
        true
    }

    pub fn gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
        let (mut r0, mut r1) = (a.to_vec(), b.to_vec());
        while !r1.is_empty() {
            let r = rem(&r0, &r1, p);
            r0 = r1;
            r1 = r;
        }
        if let Some(&lead) = r0.last() {
            let c = inv_scalar(lead, p);
            r0 = norm(r0.iter().map(|&x| (x as u128 * c as u128 % p as u128) as u64).collect());
        }
        r0
    }
}

pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

// ---------------------------------------------------------------------------
// FieldSpec and the Witt ring context
// ---------------------------------------------------------------------------

/// Description of the base field F_q, q = p^n, p odd.
#[derive(Debug, Clone)]
pub struct FieldSpec {
    pub p: u64,
    pub n: usize,
    /// Monic degree-n polynomial over Z whose reduction mod p is irreducible;
    /// `[0, 1]` (the polynomial x) when n = 1.
    pub modulus: Vec<i64>,
}

impl FieldSpec {
    pub fn prime_field(p: u64) -> Result<Self> {
        Self::new(p, 1, vec![0, 1])
    }

    pub fn new(p: u64, n: usize, modulus: Vec<i64>) -> Result<Self> {
        if p < 3 || !is_prime_u64(p) {
            return Err(Error::InvalidInput(format!(
                "odd characteristic required, got p = {p}"
            )));
        }
        if n == 0 || modulus.len() != n + 1 || modulus[n] != 1 {
            return Err(Error::InvalidInput(
                "modulus must be monic of degree n".into(),
            ));
        }
        let fbar: Vec<u64> = modulus.iter().map(|&c| c.rem_euclid(p as i64) as u64).collect();
        if !fp::is_irreducible(&fbar, p) {
            return Err(Error::InvalidInput(
                "modulus is not irreducible mod p".into(),
            ));
        }
        Ok(FieldSpec { p, n, modulus })
    }

    pub fn q(&self) -> u128 {
        (self.p as u128).pow(self.n as u32)
    }
}

/// Shared context for W(F_q)/p^M arithmetic at a fixed precision cap.
pub struct WittRing {
    pub spec: FieldSpec,
    pub m_cap: usize,
    p_pows: Vec<BigUint>,
    /// -modulus[i] mod p^m_cap for i < n, used to fold x^n during reduction.
    neg_mod: Vec<BigUint>,
    sigma_theta: OnceLock<PadicElement>,
}

impl std::fmt::Debug for WittRing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "WittRing(p={}, n={}, cap={})",
            self.spec.p, self.spec.n, self.m_cap
        )
    }
}

pub type Ring = Arc<WittRing>;

impl WittRing {
    pub fn new(spec: FieldSpec, m_cap: usize) -> Ring {
        assert!(m_cap >= 1);
        let p = BigUint::from(spec.p);
        let mut p_pows = Vec::with_capacity(m_cap + 1);
        p_pows.push(BigUint::one());
        for i in 0..m_cap {
            let next = &p_pows[i] * &p;
            p_pows.push(next);
        }
        let cap = p_pows[m_cap].clone();
        let neg_mod: Vec<BigUint> = spec.modulus[..spec.n]
            .iter()
            .map(|&c| {
                let r = (-c).rem_euclid(spec.p as i64); // representative mod p only as seed
                // lift -c to mod p^cap exactly
                let _ = r;
                let big = if c >= 0 {
                    (&cap - BigUint::from(c as u64) % &cap) % &cap
                } else {
                    BigUint::from((-c) as u64) % &cap
                };
                big
            })
            .collect();
        Arc::new(WittRing {
            spec,
            m_cap,
            p_pows,
            neg_mod,
            sigma_theta: OnceLock::new(),
        })
    }

    pub fn p(&self) -> u64 {
        self.spec.p
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn p_pow(&self, k: usize) -> &BigUint {
        assert!(k <= self.m_cap, "precision {k} exceeds ring cap {}", self.m_cap);
        &self.p_pows[k]
    }

    fn fbar(&self) -> Vec<u64> {
        self.spec
            .modulus
            .iter()
            .map(|&c| c.rem_euclid(self.spec.p as i64) as u64)
            .collect()
    }

    /// Reduce a product polynomial (degree <= 2n-2) modulo the ring modulus
    /// and modulo p^prec.
    fn reduce_poly(&self, mut a: Vec<BigUint>, prec: usize) -> Vec<BigUint> {
        let n = self.spec.n;
        let pm = self.p_pow(prec);
        for d in (n..a.len()).rev() {
            let c = std::mem::replace(&mut a[d], BigUint::zero());
            if c.is_zero() {
                continue;
            }
            for i in 0..n {
                if self.neg_mod[i].is_zero() {
                    continue;
                }
                let add = &c * &self.neg_mod[i];
                a[d - n + i] = (&a[d - n + i] + add) % pm;
            }
        }
        a.truncate(n);
        a.resize(n, BigUint::zero());
        for c in &mut a {
            *c %= pm;
        }
        a
    }
}

// ---------------------------------------------------------------------------
// PadicElement
// ---------------------------------------------------------------------------

/// Element of W(F_q)/p^prec: a polynomial of degree < n over Z/p^prec.
#[derive(Clone)]
pub struct PadicElement {
    pub ring: Ring,
    pub prec: usize,
    coeffs: Vec<BigUint>,
}

impl std::fmt::Debug for PadicElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?} + O(p^{})", self.coeffs, self.prec)
    }
}

impl PadicElement {
    pub fn zero(ring: &Ring, prec: usize) -> Self {
        PadicElement {
            ring: ring.clone(),
            prec,
            coeffs: vec![BigUint::zero(); ring.spec.n],
        }
    }

    pub fn one(ring: &Ring, prec: usize) -> Self {
        Self::from_u64(ring, 1, prec)
    }

    pub fn from_u64(ring: &Ring, v: u64, prec: usize) -> Self {
        let mut coeffs = vec![BigUint::zero(); ring.spec.n];
        coeffs[0] = BigUint::from(v) % ring.p_pow(prec);
        PadicElement {
            ring: ring.clone(),
            prec,
            coeffs,
        }
    }

    pub fn from_i64(ring: &Ring, v: i64, prec: usize) -> Self {
        if v >= 0 {
            Self::from_u64(ring, v as u64, prec)
        } else {
            Self::from_u64(ring, (-v) as u64, prec).neg()
        }
    }

    /// Build from coefficients of the generator, reduced mod p^prec.
    pub fn from_coeff_vec(ring: &Ring, coeffs: &[u64], prec: usize) -> Self {
        let n = ring.spec.n;
        assert!(coeffs.len() <= n);
        let pm = ring.p_pow(prec);
        let mut c: Vec<BigUint> = coeffs.iter().map(|&x| BigUint::from(x) % pm).collect();
        c.resize(n, BigUint::zero());
        PadicElement {
            ring: ring.clone(),
            prec,
            coeffs: c,
        }
    }

    pub fn coeff(&self, i: usize) -> &BigUint {
        &self.coeffs[i]
    }

    /// Residue mod p as an F_q element (coefficient vector mod p).
    pub fn residue(&self) -> Vec<u64> {
        let p = BigUint::from(self.ring.spec.p);
        self.coeffs
            .iter()
            .map(|c| (c % &p).to_u64_digits().first().copied().unwrap_or(0))
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn is_unit(&self) -> bool {
        self.residue().iter().any(|&c| c != 0)
    }

    /// p-adic valuation, capped at prec (returns None when zero mod p^prec).
    pub fn valuation(&self) -> Option<usize> {
        if self.is_zero() {
            return None;
        }
        let p = BigUint::from(self.ring.spec.p);
        let mut v = self.prec;
        for c in &self.coeffs {
            if c.is_zero() {
                continue;
            }
            let mut w = 0usize;
            let mut cc = c.clone();
            while (&cc % &p).is_zero() {
                cc /= &p;
                w += 1;
            }
            v = v.min(w);
        }
        Some(v)
    }

    pub fn reduce_prec(&self, prec: usize) -> Self {
        assert!(prec <= self.prec);
        let pm = self.ring.p_pow(prec);
        PadicElement {
            ring: self.ring.clone(),
            prec,
            coeffs: self.coeffs.iter().map(|c| c % pm).collect(),
        }
    }

    /// Reinterpret at higher precision (the new digits are unverified; only
    /// used internally by Newton lifts that immediately correct them).
    fn promote(&self, prec: usize) -> Self {
        assert!(prec >= self.prec && prec <= self.ring.m_cap);
        PadicElement {
            ring: self.ring.clone(),
            prec,
            coeffs: self.coeffs.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let prec = self.prec.min(other.prec);
        let pm = self.ring.p_pow(prec);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a + b) % pm)
            .collect();
        PadicElement {
            ring: self.ring.clone(),
            prec,
            coeffs,
        }
    }

    pub fn neg(&self) -> Self {
        let pm = self.ring.p_pow(self.prec);
        let coeffs = self
            .coeffs
            .iter()
            .map(|a| if a.is_zero() { a.clone() } else { pm - a })
            .collect();
        PadicElement {
            ring: self.ring.clone(),
            prec: self.prec,
            coeffs,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let prec = self.prec.min(other.prec);
        let n = self.ring.spec.n;
        let pm = self.ring.p_pow(prec);
        let mut prod = vec![BigUint::zero(); 2 * n - 1];
        for i in 0..n {
            if self.coeffs[i].is_zero() {
                continue;
            }
            for j in 0..n {
                if other.coeffs[j].is_zero() {
                    continue;
                }
                prod[i + j] = (&prod[i + j] + &self.coeffs[i] * &other.coeffs[j]) % pm;
            }
        }
        let coeffs = self.ring.reduce_poly(prod, prec);
        PadicElement {
            ring: self.ring.clone(),
            prec,
            coeffs,
        }
    }

    pub fn mul_u64(&self, k: u64) -> Self {
        let pm = self.ring.p_pow(self.prec);
        let kb = BigUint::from(k);
        PadicElement {
            ring: self.ring.clone(),
            prec: self.prec,
            coeffs: self.coeffs.iter().map(|c| c * &kb % pm).collect(),
        }
    }

    /// Exact division by p^k; requires every coefficient divisible by p^k.
    /// Drops absolute precision by k.
    pub fn div_pow_p(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Ok(self.clone());
        }
        if k >= self.prec {
            return Err(Error::PrecisionExhausted(
                "division by p^k consumes all precision".into(),
            ));
        }
        let pk = self.ring.p_pow(k).clone();
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for c in &self.coeffs {
            if !(c % &pk).is_zero() {
                return Err(Error::DivisionByNonUnit);
            }
            coeffs.push(c / &pk);
        }
        Ok(PadicElement {
            ring: self.ring.clone(),
            prec: self.prec - k,
            coeffs,
        })
    }

    pub fn mul_pow_p(&self, k: usize) -> Self {
        let prec = (self.prec + k).min(self.ring.m_cap);
        let pk = self.ring.p_pow(k);
        let pm = self.ring.p_pow(prec);
        PadicElement {
            ring: self.ring.clone(),
            prec,
            coeffs: self.coeffs.iter().map(|c| c * pk % pm).collect(),
        }
    }

    pub fn pow_biguint(&self, e: &BigUint) -> Self {
        let mut acc = Self::one(&self.ring, self.prec);
        let bits = e.bits();
        for i in (0..bits).rev() {
            acc = acc.mul(&acc);
            if e.bit(i) {
                acc = acc.mul(self);
            }
        }
        acc
    }

    /// Multiplicative inverse via Hensel lifting from the residue field.
    pub fn inv(&self) -> Result<Self> {
        if !self.is_unit() {
            return Err(Error::DivisionByNonUnit);
        }
        let ring = &self.ring;
        let p = ring.spec.p;
        let fbar = ring.fbar();
        let res = fp::norm(self.residue());
        let inv_bar = fp::invmod(&res, &fbar, p).ok_or(Error::DivisionByNonUnit)?;
        let mut inv_coeffs = inv_bar;
        inv_coeffs.resize(ring.spec.n, 0);
        let mut y = PadicElement::from_coeff_vec(ring, &inv_coeffs, 1);
        let mut cur = 1usize;
        while cur < self.prec {
            cur = (2 * cur).min(self.prec);
            let yp = y.promote(cur);
            let x = self.reduce_prec(cur);
            // y <- y (2 - x y)
            let two = PadicElement::from_u64(ring, 2, cur);
            y = yp.mul(&two.sub(&x.mul(&yp)));
        }
        Ok(y)
    }

    /// The canonical Witt-vector Frobenius sigma (identity on Z_p, sends the
    /// generator to the Hensel lift of its p-th power).
    pub fn sigma(&self) -> Self {
        let ring = &self.ring;
        if ring.spec.n == 1 {
            return self.clone();
        }
        let st = ring
            .sigma_theta
            .get_or_init(|| compute_sigma_theta(ring))
            .clone();
        let st = st.reduce_prec(self.prec.min(st.prec));
        // Horner evaluation of the coefficient polynomial at sigma(theta).
        let prec = st.prec.min(self.prec);
        let mut acc = PadicElement::zero(ring, prec);
        for i in (0..ring.spec.n).rev() {
            acc = acc.mul(&st);
            let mut sc = PadicElement::zero(ring, prec);
            sc.coeffs[0] = &self.coeffs[i] % ring.p_pow(prec);
            acc = acc.add(&sc);
        }
        acc
    }
}

/// Hensel-lift the root theta^p of the modulus, giving sigma(theta) at the
/// ring's precision cap.
fn compute_sigma_theta(ring: &Ring) -> PadicElement {
    let n = ring.spec.n;
    assert!(n > 1);
    let cap = ring.m_cap;
    let modulus: Vec<PadicElement> = ring
        .spec
        .modulus
        .iter()
        .map(|&c| PadicElement::from_i64(ring, c, cap))
        .collect();
    let deriv: Vec<PadicElement> = (1..=n)
        .map(|i| modulus[i].mul_u64(i as u64))
        .collect();
    let eval = |f: &[PadicElement], x: &PadicElement| -> PadicElement {
        let mut acc = PadicElement::zero(ring, x.prec);
        for c in f.iter().rev() {
            acc = acc.mul(x).add(&c.reduce_prec(x.prec.min(c.prec)));
        }
        acc
    };
    // Start from theta^p mod p.
    let theta = PadicElement::from_coeff_vec(ring, &[0, 1], 1);
    let mut x = theta.pow_biguint(&BigUint::from(ring.spec.p));
    let mut cur = 1usize;
    while cur < cap {
        cur = (2 * cur).min(cap);
        x = x.promote(cur);
        let fx = eval(&modulus, &x);
        let fpx = eval(&deriv, &x);
        let corr = fx.mul(&fpx.inv().expect("modulus separable mod p"));
        x = x.sub(&corr);
    }
    x
}

/// Teichmueller lift: the unique root of x^q = x in W(F_q) with the given
/// residue, computed by Newton iteration on x^{q-1} - 1.
pub fn teichmuller_lift(ring: &Ring, residue: &[u64], prec: usize) -> PadicElement {
    let nonzero = residue.iter().any(|&c| c % ring.spec.p != 0);
    if !nonzero {
        return PadicElement::zero(ring, prec);
    }
    let q_minus_1 = {
        let q = BigUint::from(ring.spec.p).pow(ring.spec.n as u32);
        q - BigUint::one()
    };
    let mut x = PadicElement::from_coeff_vec(ring, residue, 1);
    let mut cur = 1usize;
    while cur < prec {
        cur = (2 * cur).min(prec);
        x = x.promote(cur);
        // x <- x - (x^{q-1} - 1) x / ((q-1) x^{q-1})
        let xq1 = x.pow_biguint(&q_minus_1);
        let one = PadicElement::one(&ring.clone(), cur);
        let num = xq1.sub(&one).mul(&x);
        let den = xq1.mul_u64(0).add(&xq1).mul(&qm1_scalar(ring, cur, &q_minus_1));
        let corr = num.mul(&den.inv().expect("q-1 invertible mod p"));
        x = x.sub(&corr);
    }
    x
}

fn qm1_scalar(ring: &Ring, prec: usize, q_minus_1: &BigUint) -> PadicElement {
    let mut e = PadicElement::zero(ring, prec);
    e.coeffs[0] = q_minus_1 % ring.p_pow(prec);
    e
}

// ---------------------------------------------------------------------------
// KCoefficient: fraction-field elements at finite absolute precision
// ---------------------------------------------------------------------------

/// Element of K = Frac(W(F_q)) known modulo p^prec_abs, stored as
/// p^val * mantissa with a unit mantissa (or flagged zero-to-precision).
#[derive(Clone)]
pub struct KCoefficient {
    pub ring: Ring,
    /// Valuation of the stored value (meaningless when mantissa is None).
    val: i64,
    /// Unit mantissa with mantissa.prec = prec_abs - val; None = zero to
    /// the tracked precision.
    mantissa: Option<PadicElement>,
    /// The value is known modulo p^prec_abs.
    prec_abs: i64,
}

impl std::fmt::Debug for KCoefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.mantissa {
            None => write!(f, "O(p^{})", self.prec_abs),
            Some(m) => write!(f, "p^{}*{:?} + O(p^{})", self.val, m.coeffs, self.prec_abs),
        }
    }
}

impl KCoefficient {
    pub fn zero(ring: &Ring, prec_abs: i64) -> Self {
        KCoefficient {
            ring: ring.clone(),
            val: 0,
            mantissa: None,
            prec_abs,
        }
    }

    pub fn from_padic(x: &PadicElement) -> Self {
        let prec_abs = x.prec as i64;
        match x.valuation() {
            None => KCoefficient {
                ring: x.ring.clone(),
                val: 0,
                mantissa: None,
                prec_abs,
            },
            Some(v) => {
                let m = x.div_pow_p(v).expect("valuation computed");
                KCoefficient {
                    ring: x.ring.clone(),
                    val: v as i64,
                    mantissa: Some(m),
                    prec_abs,
                }
            }
        }
    }

    pub fn from_i64(ring: &Ring, v: i64) -> Self {
        Self::from_padic(&PadicElement::from_i64(ring, v, ring.m_cap))
    }

    /// num/den * p^extra_val as an exact rational at the ring cap.
    pub fn from_ratio(ring: &Ring, num: i64, den: i64) -> Self {
        assert!(den != 0);
        let n = Self::from_i64(ring, num);
        let d = Self::from_i64(ring, den);
        n.div(&d).expect("nonzero denominator")
    }

    pub fn is_zero(&self) -> bool {
        if self.mantissa.is_none() && self.prec_abs < 1 {
            note_ambiguous_zero();
        }
        self.mantissa.is_none()
    }

    pub fn valuation(&self) -> Option<i64> {
        self.mantissa.as_ref().map(|_| self.val)
    }

    pub fn precision(&self) -> i64 {
        self.prec_abs
    }

    /// Shift by p^k.
    pub fn shift_val(&self, k: i64) -> Self {
        let mut out = self.clone();
        out.val += k;
        out.prec_abs += k;
        out
    }

    /// Truncate to a lower absolute precision.
    pub fn truncate_abs(&self, prec_abs: i64) -> Self {
        if prec_abs >= self.prec_abs {
            return self.clone();
        }
        match &self.mantissa {
            None => KCoefficient::zero(&self.ring, prec_abs),
            Some(m) => {
                let rel = prec_abs - self.val;
                if rel <= 0 {
                    KCoefficient::zero(&self.ring, prec_abs)
                } else {
                    KCoefficient {
                        ring: self.ring.clone(),
                        val: self.val,
                        mantissa: Some(m.reduce_prec(rel as usize)),
                        prec_abs,
                    }
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let prec = self.prec_abs.min(other.prec_abs);
        match (&self.mantissa, &other.mantissa) {
            (None, _) => other.truncate_abs(prec),
            (_, None) => self.truncate_abs(prec),
            (Some(_), Some(_)) => {
                let (lo, hi) = if self.val <= other.val {
                    (self, other)
                } else {
                    (other, self)
                };
                let rel = prec - lo.val;
                if rel <= 0 {
                    return KCoefficient::zero(&self.ring, prec);
                }
                let rel = rel as usize;
                let ml = lo.mantissa.as_ref().unwrap();
                let mh = hi.mantissa.as_ref().unwrap();
                let shift = (hi.val - lo.val) as usize;
                let a = if ml.prec >= rel {
                    ml.reduce_prec(rel)
                } else {
                    // Cannot happen: prec_abs = val + mantissa.prec >= prec.
                    ml.clone()
                };
                let b = if shift >= rel {
                    PadicElement::zero(&self.ring, rel)
                } else {
                    let need = rel - shift;
                    mh.reduce_prec(need.min(mh.prec)).mul_pow_p(shift)
                };
                let sum = a.add(&b.reduce_prec(b.prec.min(rel)));
                let mut out = KCoefficient::from_padic(&sum);
                out.val += lo.val;
                out.prec_abs = prec;
                out
            }
        }
    }

    pub fn neg(&self) -> Self {
        KCoefficient {
            ring: self.ring.clone(),
            val: self.val,
            mantissa: self.mantissa.as_ref().map(|m| m.neg()),
            prec_abs: self.prec_abs,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        match (&self.mantissa, &other.mantissa) {
            (None, None) => KCoefficient::zero(&self.ring, self.prec_abs + other.prec_abs),
            (None, Some(_)) => KCoefficient::zero(&self.ring, self.prec_abs + other.val),
            (Some(_), None) => KCoefficient::zero(&self.ring, other.prec_abs + self.val),
            (Some(a), Some(b)) => {
                let rel = a.prec.min(b.prec);
                let m = a.reduce_prec(rel).mul(&b.reduce_prec(rel));
                let mut out = KCoefficient::from_padic(&m);
                out.val += self.val + other.val;
                out.prec_abs += self.val + other.val;
                out
            }
        }
    }

    pub fn inv(&self) -> Result<Self> {
        match &self.mantissa {
            None => Err(Error::DivisionByNonUnit),
            Some(m) => {
                let mi = m.inv()?;
                Ok(KCoefficient {
                    ring: self.ring.clone(),
                    val: -self.val,
                    mantissa: Some(mi),
                    prec_abs: self.prec_abs - 2 * self.val,
                })
            }
        }
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self.mul(&other.inv()?))
    }

    pub fn sigma(&self) -> Self {
        KCoefficient {
            ring: self.ring.clone(),
            val: self.val,
            mantissa: self.mantissa.as_ref().map(|m| m.sigma()),
            prec_abs: self.prec_abs,
        }
    }

    /// The difference is zero at the shared precision.
    pub fn eq_to_prec(&self, other: &Self) -> bool {
        self.sub(other).mantissa.is_none()
    }

    /// Unit part times p^val as a PadicElement, when val >= 0 and the value
    /// fits in the ring (used to move results back into W(F_q)).
    pub fn to_padic(&self) -> Result<PadicElement> {
        match &self.mantissa {
            None => {
                let prec = self.prec_abs.max(1).min(self.ring.m_cap as i64) as usize;
                Ok(PadicElement::zero(&self.ring, prec))
            }
            Some(m) => {
                if self.val < 0 {
                    return Err(Error::PrecisionExhausted(format!(
                        "negative valuation {} cannot be represented integrally",
                        self.val
                    )));
                }
                Ok(m.mul_pow_p(self.val as usize))
            }
        }
    }

    /// Balanced integer representative in (-p^prec/2, p^prec/2], only valid
    /// for prime-field scalars (n = 1 component).
    pub fn balanced_integer(&self, prec: usize) -> Result<num_bigint::BigInt> {
        use num_bigint::BigInt;
        let x = self.truncate_abs(prec as i64);
        match &x.mantissa {
            None => Ok(BigInt::from(0)),
            Some(m) => {
                if x.val < 0 {
                    return Err(Error::CoefficientOutOfWeilRange {
                        index: 0,
                        value: format!("negative valuation {}", x.val),
                    });
                }
                let full = m.mul_pow_p(x.val as usize);
                for i in 1..full.ring.spec.n {
                    if !full.coeff(i).is_zero() {
                        return Err(Error::CoefficientOutOfWeilRange {
                            index: i,
                            value: "non-scalar Witt vector".into(),
                        });
                    }
                }
                let pm = full.ring.p_pow(prec.min(full.prec)).clone();
                let c = full.coeff(0) % &pm;
                let half = &pm / 2u32;
                let ci = BigInt::from(c.clone());
                if c > half {
                    Ok(ci - BigInt::from(pm))
                } else {
                    Ok(ci)
                }
            }
        }
    }
}
