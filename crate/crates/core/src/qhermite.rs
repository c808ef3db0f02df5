//! Continuous big q-Hermite polynomials with `a = 1` and their orthogonality
//! weight on `[-1, 1]`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{domain, Result};
use crate::qseries::{check_q, qpoch_finite, qpoch_infinite, truncation_depth};
use crate::quad::{integrate, QuadOptions, QuadResult};
use crate::scalar::Scalar;

/// `H_n(x|q)` by `H_{k+1} = (2x - q^k) H_k - (1 - q^k) H_{k-1}`.
pub fn h_eval<S: Scalar>(n: usize, x: &S, q: &S) -> S {
    let two_x = S::from_i64(2) * x.clone();
    let mut prev = S::zero();
    let mut cur = S::one();
    let mut qk = S::one();
    for _ in 0..n {
        let next = (two_x.clone() - qk.clone()) * cur.clone() - (S::one() - qk.clone()) * prev;
        prev = cur;
        cur = next;
        qk = qk * q.clone();
    }
    cur
}

/// `[H_0(x), ..., H_n(x)]`.
pub fn h_eval_all(n: usize, x: f64, q: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut qk = 1.0;
    out.push(cur);
    for _ in 0..n {
        let next = (2.0 * x - qk) * cur - (1.0 - qk) * prev;
        prev = cur;
        cur = next;
        qk *= q;
        out.push(cur);
    }
    out
}

/// `h(x, alpha) = prod_k (1 - 2 alpha x q^k + alpha^2 q^{2k})`.
fn h_factor(x: f64, alpha: f64, q: f64, tol: f64) -> f64 {
    // Each factor is |1 - alpha e^{i theta} q^k|^2, so the tail bound for
    // (alpha e^{i theta}; q) applies twice.
    let depth = truncation_depth(alpha.abs(), q, tol / 2.0);
    let mut acc = 1.0;
    let mut aq = alpha;
    for _ in 0..depth {
        acc *= 1.0 - 2.0 * aq * x + aq * aq;
        aq *= q;
    }
    acc
}

fn check_open_interval(x: f64) -> Result<()> {
    if x.is_finite() && x.abs() < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("the weight is evaluated on (-1,1), got x = {x}")))
    }
}

/// Orthogonality weight
/// `w(x) = (q;q)_inf / (2 pi sqrt(1-x^2)) h(x,-1) h(x,sqrt q) h(x,-sqrt q)`.
pub fn weight_w(x: f64, q: f64, tol: f64) -> Result<f64> {
    check_q(q)?;
    check_open_interval(x)?;
    let budget = tol / 4.0;
    let sq = q.sqrt();
    let prod = h_factor(x, -1.0, q, budget) * h_factor(x, sq, q, budget) * h_factor(x, -sq, q, budget);
    Ok(qpoch_infinite(q, q, budget)? * prod / (2.0 * PI * (1.0 - x * x).sqrt()))
}

/// `|(e^{2 i theta}; q)_inf|^2 / |(e^{i theta}; q)_inf|^2`, with the `k = 0`
/// factors combined analytically into `4 cos^2(theta/2)`.
fn pochhammer_ratio(theta: f64, q: f64, tol: f64) -> f64 {
    let e1 = Complex64::from_polar(1.0, theta);
    let e2 = e1 * e1;
    let depth = truncation_depth(1.0, q, tol / 4.0);
    let half = (0.5 * theta).cos();
    let mut acc = 4.0 * half * half;
    let mut qk = q;
    for _ in 1..depth {
        if qk == 0.0 {
            break;
        }
        acc *= (Complex64::new(1.0, 0.0) - e2 * qk).norm_sqr() / (Complex64::new(1.0, 0.0) - e1 * qk).norm_sqr();
        qk *= q;
    }
    acc
}

/// The weight in its Askey–Wilson form
/// `(q;q)_inf / (2 pi sqrt(1-x^2)) |(e^{2i theta};q)_inf|^2 / |(e^{i theta};q)_inf|^2`.
pub fn weight_w_form1(x: f64, q: f64, tol: f64) -> Result<f64> {
    check_q(q)?;
    check_open_interval(x)?;
    let theta = x.acos();
    Ok(qpoch_infinite(q, q, tol / 4.0)? * pochhammer_ratio(theta, q, tol) / (2.0 * PI * (1.0 - x * x).sqrt()))
}

/// `w(cos theta) sin theta`, the smooth density in the angle variable.
pub fn weight_theta(theta: f64, q: f64, tol: f64) -> Result<f64> {
    check_q(q)?;
    Ok(qpoch_infinite(q, q, tol / 4.0)? * pochhammer_ratio(theta, q, tol) / (2.0 * PI))
}

/// `int_{-1}^{1} H_m H_n w dx`, computed in `theta = arccos x`.
pub fn orthogonality_integral(m: usize, n: usize, q: f64, quad_tol: f64) -> Result<QuadResult> {
    check_q(q)?;
    if m > 40 || n > 40 {
        return Err(domain("orthogonality checks are limited to degrees <= 40"));
    }
    let norm = qpoch_infinite(q, q, 1e-16)? / (2.0 * PI);
    let f = |theta: f64| {
        let x = theta.cos();
        h_eval(m, &x, &q) * h_eval(n, &x, &q) * norm * pochhammer_ratio(theta, q, 1e-16)
    };
    let opts = QuadOptions {
        abs_tol: quad_tol,
        rel_tol: 0.0,
        max_intervals: 2000,
    };
    integrate(f, 0.0, PI, opts)
}

fn series_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = a.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate().take(n - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Truncated power series of `(a t; q)_inf` (or its reciprocal) in `t`, built
/// factor by factor.
fn pochhammer_series(a: Complex64, q: f64, order: usize, invert: bool) -> Vec<Complex64> {
    let mut series = vec![Complex64::new(0.0, 0.0); order + 1];
    series[0] = Complex64::new(1.0, 0.0);
    let mut aq = a;
    let mut j = 0usize;
    loop {
        if aq.norm() < 1e-18 {
            break;
        }
        let factor: Vec<Complex64> = if invert {
            // 1 / (1 - aq t) = sum (aq)^m t^m.
            let mut f = Vec::with_capacity(order + 1);
            let mut p = Complex64::new(1.0, 0.0);
            for _ in 0..=order {
                f.push(p);
                p *= aq;
            }
            f
        } else {
            let mut f = vec![Complex64::new(0.0, 0.0); order + 1];
            f[0] = Complex64::new(1.0, 0.0);
            if order > 0 {
                f[1] = -aq;
            }
            f
        };
        series = series_mul(&series, &factor);
        j += 1;
        if q == 0.0 || j > 100_000 {
            break;
        }
        aq *= q;
    }
    series
}

/// `H_0..H_N` at `cos theta` read off the generating function
/// `sum_n H_n t^n / (q;q)_n = (t;q)_inf / ((e^{i theta} t; q)_inf (e^{-i theta} t; q)_inf)`.
pub fn gf_coeff_oracle(theta: f64, q: f64, order: usize) -> Result<Vec<f64>> {
    check_q(q)?;
    if order > 60 {
        return Err(domain("generating-function oracle is limited to N <= 60"));
    }
    if !(theta > 0.0 && theta <= PI) {
        return Err(domain(format!("theta must lie in (0, pi], got {theta}")));
    }
    let one = Complex64::new(1.0, 0.0);
    let num = pochhammer_series(one, q, order, false);
    let d1 = pochhammer_series(Complex64::from_polar(1.0, theta), q, order, true);
    let d2 = pochhammer_series(Complex64::from_polar(1.0, -theta), q, order, true);
    let series = series_mul(&series_mul(&num, &d1), &d2);
    Ok(series
        .iter()
        .enumerate()
        .map(|(n, c)| c.re * qpoch_finite(&q, &q, n))
        .collect())
}

/// `(H_n(1 - u^2/(2n^2)), cos u)`.
pub fn endpoint_limit_check(u: f64, q: f64, n: usize) -> Result<(f64, f64)> {
    check_q(q)?;
    if n == 0 {
        return Err(domain("n must be positive"));
    }
    let nf = n as f64;
    let x = 1.0 - u * u / (2.0 * nf * nf);
    Ok((h_eval(n, &x, &q), u.cos()))
}

/// `(sqrt 2 / pi) (q;q)_inf (-q;q)_inf^4`, a uniform bound for
/// `sqrt(1-x) w(x)` on `[0, 1)`.
pub fn weight_bound_constant(q: f64) -> Result<f64> {
    let a = qpoch_infinite(q, q, 1e-15)?;
    let b = qpoch_infinite(-q, q, 1e-15)?;
    Ok(2f64.sqrt() / PI * a * b.powi(4))
}

/// `max |H_n(x)|` over `points` equally spaced abscissae of `[lo, hi]`.
pub fn sup_on_grid(n: usize, q: f64, lo: f64, hi: f64, points: usize) -> f64 {
    let points = points.max(2);
    (0..points)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            h_eval(n, &x, &q).abs()
        })
        .fold(0.0, f64::max)
}
