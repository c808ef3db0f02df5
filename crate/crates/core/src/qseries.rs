//! q-Pochhammer symbols, q-numbers and the q-Gamma function.

use num_complex::Complex64;

use crate::error::{domain, Result};
use crate::scalar::{Ring, Scalar};

pub type ComplexScalar = Complex64;

/// Validated asymmetry parameter, `0 <= q < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct QParam(f64);

impl QParam {
    pub fn new(q: f64) -> Result<Self> {
        check_q(q)?;
        Ok(Self(q))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

pub(crate) fn check_q(q: f64) -> Result<()> {
    if q.is_finite() && (0.0..1.0).contains(&q) {
        Ok(())
    } else {
        Err(domain(format!("q must lie in [0,1), got {q}")))
    }
}

/// `(a; q)_n = prod_{i<n} (1 - a q^i)`, exact for exact scalars.
pub fn qpoch_finite<S: Scalar>(a: &S, q: &S, n: usize) -> S {
    let mut acc = S::one();
    let mut aq = a.clone();
    for _ in 0..n {
        acc = acc * (S::one() - aq.clone());
        aq = aq * q.clone();
    }
    acc
}

/// Number of factors needed so the neglected tail of `(a;q)_inf` changes the
/// product by a relative amount below `tol`.
pub fn truncation_depth(abs_a: f64, q: f64, tol: f64) -> usize {
    if abs_a == 0.0 || q == 0.0 {
        return 1;
    }
    let mut n = 0usize;
    let mut t = abs_a;
    // Tail log bound: sum_{i>=N} |a|q^i/(1-|a|q^i) <= |a|q^N / ((1-q)(1-|a|q^N)).
    while t >= 1.0 || t / ((1.0 - q) * (1.0 - t)) >= 0.5 * tol {
        t *= q;
        n += 1;
        if t == 0.0 {
            break;
        }
    }
    n.max(1)
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("tolerance must be positive, got {tol}")))
    }
}

/// `(a; q)_inf` for real `|a| <= 1`.
pub fn qpoch_infinite(a: f64, q: f64, tol: f64) -> Result<f64> {
    check_q(q)?;
    check_tol(tol)?;
    if !(a.abs() <= 1.0) {
        return Err(domain(format!("|a| must be at most 1, got {a}")));
    }
    Ok(qpoch_infinite_depth(a, q, truncation_depth(a.abs(), q, tol)))
}

/// The product truncated after exactly `depth` factors.
pub fn qpoch_infinite_depth(a: f64, q: f64, depth: usize) -> f64 {
    let mut acc = 1.0;
    let mut aq = a;
    for _ in 0..depth {
        acc *= 1.0 - aq;
        aq *= q;
    }
    acc
}

/// `(a; q)_inf` for complex `a` of any modulus (the product converges for
/// every `a` once `|a| q^N < 1`).
pub fn qpoch_infinite_complex(a: Complex64, q: f64, tol: f64) -> Result<Complex64> {
    check_q(q)?;
    check_tol(tol)?;
    if !a.is_finite() {
        return Err(domain("non-finite q-Pochhammer argument"));
    }
    let depth = truncation_depth(a.norm(), q, tol);
    let mut acc = Complex64::new(1.0, 0.0);
    let mut aq = a;
    for _ in 0..depth {
        acc *= Complex64::new(1.0, 0.0) - aq;
        aq *= q;
    }
    Ok(acc)
}

/// `ln (a; q)_inf` for real `a < 1`; stays finite where the product itself
/// underflows (q close to 1).
pub fn ln_qpoch_infinite(a: f64, q: f64, tol: f64) -> Result<f64> {
    check_q(q)?;
    check_tol(tol)?;
    if !(a < 1.0) || !(a.abs() <= 1.0) {
        return Err(domain(format!("log q-Pochhammer needs -1 <= a < 1, got {a}")));
    }
    let depth = truncation_depth(a.abs(), q, tol);
    let mut acc = 0.0;
    let mut aq = a;
    for _ in 0..depth {
        acc += (-aq).ln_1p();
        aq *= q;
    }
    Ok(acc)
}

/// A logarithm of `(a; q)_inf` for complex `a` (branch unspecified; use it
/// inside `exp` or for the real part).
pub fn ln_qpoch_infinite_complex(a: Complex64, q: f64, tol: f64) -> Result<Complex64> {
    check_q(q)?;
    check_tol(tol)?;
    if !a.is_finite() {
        return Err(domain("non-finite q-Pochhammer argument"));
    }
    let depth = truncation_depth(a.norm(), q, tol);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut aq = a;
    for _ in 0..depth {
        let f = Complex64::new(1.0, 0.0) - aq;
        if f.norm() == 0.0 {
            return Err(domain("q-Pochhammer product vanishes"));
        }
        acc += f.ln();
        aq *= q;
    }
    Ok(acc)
}

/// `[n]_q = 1 + q + ... + q^{n-1}`.
pub fn q_number<S: Ring>(n: usize, q: &S) -> S {
    let mut acc = S::zero();
    let mut p = S::one();
    for _ in 0..n {
        acc = acc + p.clone();
        p = p * q.clone();
    }
    acc
}

/// `[n]_q! = prod_{i=1}^n [i]_q`.
pub fn q_factorial<S: Ring>(n: usize, q: &S) -> S {
    let mut acc = S::one();
    let mut num = S::zero();
    let mut p = S::one();
    for _ in 0..n {
        num = num + p.clone();
        p = p * q.clone();
        acc = acc * num.clone();
    }
    acc
}

/// `Gamma_q(z) = (1-q)^{1-z} (q;q)_inf / (q^z;q)_inf`.
pub fn q_gamma(z: Complex64, q: f64, tol: f64) -> Result<Complex64> {
    check_tol(tol)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(domain(format!("q-Gamma needs q in (0,1), got {q}")));
    }
    if z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0 {
        return Err(domain(format!("q-Gamma has a pole at z = {}", z.re)));
    }
    let ln_q = q.ln();
    let qz = (z * ln_q).exp();
    // Split the budget between the two products.
    // Log space: (q;q)_inf underflows f64 once q is within ~1e-3 of 1.
    let num = ln_qpoch_infinite(q, q, tol / 4.0)?;
    let den = ln_qpoch_infinite_complex(qz, q, tol / 4.0)?;
    Ok(((Complex64::new(1.0, 0.0) - z) * (1.0 - q).ln() + num - den).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn finite_products() {
        assert_eq!(qpoch_finite(&r(1, 2), &r(1, 2), 0), r(1, 1));
        assert_eq!(qpoch_finite(&r(1, 2), &r(1, 2), 2), r(3, 8));
        assert_eq!(qpoch_finite(&r(1, 2), &r(1, 2), 3), r(21, 64));
        for n in 0..10 {
            let a = r(2, 3);
            let q = r(1, 5);
            let lhs = qpoch_finite(&a, &q, n + 1);
            let rhs = qpoch_finite(&a, &q, n) * (r(1, 1) - a.clone() * q.powi(n as i64));
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn infinite_products() {
        assert_eq!(qpoch_infinite(0.0, 0.7, 1e-12).unwrap(), 1.0);
        let v = qpoch_infinite(0.5, 0.5, 1e-12).unwrap();
        let brute = qpoch_infinite_depth(0.5, 0.5, 200);
        assert!((v - brute).abs() < 1e-12);
        assert!((v - 0.288_788_095_087).abs() < 1e-12);
        assert!(qpoch_infinite(0.5, 1.0, 1e-12).is_err());
        assert!(qpoch_infinite(0.5, -0.1, 1e-12).is_err());
        assert_eq!(qpoch_infinite(0.3, 0.0, 1e-12).unwrap(), 0.7);
    }

    #[test]
    fn euler_identity_minus_q_times_q_odd() {
        for i in 1..10 {
            let q = i as f64 / 10.0;
            let prod = qpoch_infinite(-q, q, 1e-14).unwrap() * qpoch_infinite(q, q * q, 1e-14).unwrap();
            assert!((prod - 1.0).abs() < 1e-10, "q={q}: {prod}");
        }
    }

    #[test]
    fn doubling_depth_changes_little() {
        for &(a, q) in &[(0.5, 0.5), (-0.9, 0.9), (1.0, 0.99), (0.01, 0.999)] {
            let tol = 1e-10;
            let d = truncation_depth(f64::abs(a), q, tol);
            let v1 = qpoch_infinite_depth(a, q, d);
            let v2 = qpoch_infinite_depth(a, q, 2 * d);
            assert!((v1 - v2).abs() <= tol * v2.abs().max(1e-300) + 1e-300, "a={a} q={q}");
        }
    }

    #[test]
    fn q_numbers() {
        assert_eq!(q_number(0, &r(1, 2)), r(0, 1));
        assert_eq!(q_number(1, &r(1, 2)), r(1, 1));
        assert_eq!(q_number(3, &r(1, 2)), r(7, 4));
        assert_eq!(q_factorial(3, &r(1, 2)), r(21, 8));
        assert_eq!(q_factorial(0, &r(1, 2)), r(1, 1));
    }

    #[test]
    fn q_gamma_values() {
        let one = Complex64::new(1.0, 0.0);
        assert!((q_gamma(one, 0.5, 1e-14).unwrap() - one).norm() < 1e-13);
        assert!((q_gamma(Complex64::new(2.0, 0.0), 0.5, 1e-14).unwrap() - one).norm() < 1e-13);
        let g = q_gamma(Complex64::new(0.5, 0.0), 0.999, 1e-13).unwrap();
        assert!((g.re - std::f64::consts::PI.sqrt()).abs() < 1e-2);
        assert!(q_gamma(Complex64::new(-2.0, 0.0), 0.5, 1e-12).is_err());
        assert!(q_gamma(Complex64::new(0.0, 0.0), 0.5, 1e-12).is_err());
    }

    #[test]
    fn q_gamma_functional_equation() {
        for &q in &[0.3, 0.7] {
            for &z in &[0.5, 1.5, 2.5] {
                let zc = Complex64::new(z, 0.0);
                let lhs = q_gamma(zc + 1.0, q, 1e-15).unwrap();
                let rhs = q_gamma(zc, q, 1e-15).unwrap() * (1.0 - q.powf(z)) / (1.0 - q);
                assert!((lhs - rhs).norm() < 1e-10, "q={q} z={z}");
            }
        }
    }
}
