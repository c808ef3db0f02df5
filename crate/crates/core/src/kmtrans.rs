//! Karlin–McGregor transition probabilities for the queue chain
//! `P(k,k+1) = c`, `P(k,k-1) = c(1-q^k)`, and a truncated-matrix oracle.

use std::f64::consts::PI;

use crate::error::{domain, precondition, Result};
use crate::moments::ModelParams;
use crate::qhermite::{h_eval, weight_theta};
use crate::qseries::{qpoch_finite, qpoch_infinite};
use crate::quad::{integrate_with_breaks, QuadOptions};

/// Birth–death rates of the queue length.
#[derive(Debug, Clone, Copy)]
pub struct BirthDeathSpec {
    pub q: f64,
    pub c: f64,
}

impl BirthDeathSpec {
    pub fn new(params: &ModelParams<f64>) -> Self {
        Self {
            q: *params.q(),
            c: *params.c(),
        }
    }

    pub fn up(&self, _k: usize) -> f64 {
        self.c
    }

    pub fn down(&self, k: usize) -> f64 {
        self.c * (1.0 - self.q.powi(k as i32))
    }

    pub fn stay(&self, k: usize) -> f64 {
        1.0 - self.c * (2.0 - self.q.powi(k as i32))
    }
}

/// The chain restricted to `{0..K}`; the up-move out of `K` is folded into
/// staying put.
#[derive(Debug, Clone)]
pub struct TruncatedChain {
    spec: BirthDeathSpec,
    cap: usize,
    down: Vec<f64>,
    stay: Vec<f64>,
}

impl TruncatedChain {
    pub fn new(spec: BirthDeathSpec, cap: usize) -> Self {
        let down: Vec<f64> = (0..=cap).map(|k| spec.down(k)).collect();
        let mut stay: Vec<f64> = (0..=cap).map(|k| spec.stay(k)).collect();
        stay[cap] += spec.up(cap);
        Self { spec, cap, down, stay }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Row `k` of the transition matrix as `(down, stay, up)`.
    pub fn row(&self, k: usize) -> (f64, f64, f64) {
        let up = if k == self.cap { 0.0 } else { self.spec.up(k) };
        (self.down[k], self.stay[k], up)
    }

    /// One step of the forward equation `p <- p P`.
    pub fn step(&self, p: &[f64]) -> Vec<f64> {
        let c = self.spec.c;
        let mut out = vec![0.0; p.len()];
        for (k, &mass) in p.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            out[k] += mass * self.stay[k];
            if k > 0 {
                out[k - 1] += mass * self.down[k];
            }
            if k < self.cap {
                out[k + 1] += mass * c;
            }
        }
        out
    }

    /// `e_i P^n`.
    pub fn power_row(&self, i: usize, n: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.cap + 1];
        p[i] = 1.0;
        for _ in 0..n {
            p = self.step(&p);
        }
        p
    }
}

/// `(P^n)_{ij}` on the chain truncated at `K >= i + n`.
pub fn matrix_transition(i: usize, j: usize, n: usize, params: &ModelParams<f64>, cap: usize) -> Result<f64> {
    if cap < i + n {
        return Err(precondition(format!("cap K={cap} must be at least i+n={}", i + n)));
    }
    let row = TruncatedChain::new(BirthDeathSpec::new(params), cap).power_row(i, n);
    Ok(row.get(j).copied().unwrap_or(0.0))
}

/// Breakpoints `0, 1/sqrt n, 3/sqrt n, 10/sqrt n, 30/sqrt n, ..., pi` that
/// keep the adaptive rule from stepping over the peak at `theta = 0`.
fn seed_breaks(n: usize, upper: f64) -> Vec<f64> {
    let mut pts = vec![0.0];
    if n > 0 {
        let s = 1.0 / (n as f64).sqrt();
        let mut scale = 1.0;
        loop {
            for m in [1.0, 3.0] {
                let t = m * scale * s;
                if t < upper {
                    pts.push(t);
                }
            }
            scale *= 10.0;
            if scale * s >= upper {
                break;
            }
        }
    }
    pts.push(upper);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn km_integral(
    i: usize,
    j: usize,
    n: usize,
    params: &ModelParams<f64>,
    quad_tol: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let q = *params.q();
    let c = *params.c();
    let f = |theta: f64| {
        let z = theta.cos();
        let lam = 1.0 - 2.0 * c + 2.0 * c * z;
        let w = weight_theta(theta, q, 1e-16).unwrap_or(f64::NAN);
        lam.powi(n as i32) * h_eval(i, &z, &q) * h_eval(j, &z, &q) * w
    };
    let mut breaks: Vec<f64> = seed_breaks(n, PI).into_iter().filter(|t| *t > lo && *t < hi).collect();
    breaks.insert(0, lo);
    breaks.push(hi);
    let qj = qpoch_finite(&q, &q, j);
    let opts = QuadOptions {
        abs_tol: quad_tol * qj,
        rel_tol: 0.0,
        max_intervals: 4000,
    };
    Ok(integrate_with_breaks(f, &breaks, opts)?.value / qj)
}

/// `P(Q_{n+1} = j | Q_1 = i)` from the spectral integral
/// `(1/(q;q)_j) int_0^pi (1 - 2c + 2c cos theta)^n H_i H_j w sin theta dtheta`.
pub fn km_transition(i: usize, j: usize, n: usize, params: &ModelParams<f64>, quad_tol: f64) -> Result<f64> {
    if !(quad_tol > 0.0) {
        return Err(domain("quadrature tolerance must be positive"));
    }
    km_integral(i, j, n, params, quad_tol, 0.0, PI)
}

/// The part of the spectral integral coming from `z = cos theta in [-1, 0]`.
pub fn km_transition_negative_half(
    i: usize,
    j: usize,
    n: usize,
    params: &ModelParams<f64>,
    quad_tol: f64,
) -> Result<f64> {
    km_integral(i, j, n, params, quad_tol, 0.5 * PI, PI)
}

/// `pi_k = (q;q)_inf q^k / (q;q)_k` for `k = 0..=k0`, where `k0` is the first
/// level whose geometric tail bound `q^{k0+1}/(1-q)` drops below `tail_tol`.
pub fn initial_law(q: f64, tail_tol: f64) -> Result<Vec<f64>> {
    if !(tail_tol > 0.0) {
        return Err(domain("tail tolerance must be positive"));
    }
    let p0 = qpoch_infinite(q, q, 1e-16)?;
    let mut out = vec![p0];
    let mut qk = 1.0;
    let mut pk = p0;
    while qk * q / (1.0 - q) >= tail_tol {
        qk *= q;
        pk *= q / (1.0 - qk);
        out.push(pk);
    }
    Ok(out)
}

/// Law of `Q_{n+1}` started from the stationary conditional law of `Q_1`.
#[derive(Debug, Clone)]
pub struct DistributionAfterN {
    pub probs: Vec<f64>,
    pub mean: f64,
    pub initial_mean: f64,
    /// Highest initial level kept.
    pub k0: usize,
}

impl DistributionAfterN {
    pub fn mean_gap(&self) -> f64 {
        self.mean - self.initial_mean
    }
}

pub fn distribution_after_n(
    n: usize,
    params: &ModelParams<f64>,
    cap: Option<usize>,
    init_tail_tol: f64,
) -> Result<DistributionAfterN> {
    let pi = initial_law(*params.q(), init_tail_tol)?;
    let k0 = pi.len() - 1;
    let cap = cap.unwrap_or(k0 + n);
    if cap < k0 + n {
        return Err(precondition(format!("cap K={cap} must be at least k0+n={}", k0 + n)));
    }
    let chain = TruncatedChain::new(BirthDeathSpec::new(params), cap);
    let mut p = vec![0.0; cap + 1];
    p[..=k0].copy_from_slice(&pi);
    let initial_mean = mean_of(&p);
    for _ in 0..n {
        p = chain.step(&p);
    }
    Ok(DistributionAfterN {
        mean: mean_of(&p),
        probs: p,
        initial_mean,
        k0,
    })
}

fn mean_of(p: &[f64]) -> f64 {
    p.iter().enumerate().map(|(k, v)| k as f64 * v).sum()
}

/// Half-normal density with variance `2c`: `exp(-y^2/4c) / sqrt(c pi)`.
pub fn local_limit_density(y: f64, c: f64) -> f64 {
    (-y * y / (4.0 * c)).exp() / (c * PI).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalRoute {
    Spectral,
    Matrix,
}

/// `(sqrt(n) P(Q_{n+1} = floor(y sqrt n) | Q_1 = 0), half-normal density)`.
pub fn local_limit_check(y: f64, n: usize, params: &ModelParams<f64>, route: LocalRoute) -> Result<(f64, f64)> {
    if !(y >= 0.0) {
        return Err(domain("y must be nonnegative"));
    }
    let rn = (n as f64).sqrt();
    let j = (y * rn).floor() as usize;
    let p = match route {
        LocalRoute::Spectral => km_transition(0, j, n, params, 1e-9 / rn)?,
        LocalRoute::Matrix => matrix_transition(0, j, n, params, n)?,
    };
    Ok((rn * p, local_limit_density(y, *params.c())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::expected_convoy_dp;
    use crate::quad::{integrate, QuadOptions};
    use num_rational::BigRational;
    use crate::scalar::Scalar;

    fn p(q: f64, x: f64) -> ModelParams<f64> {
        ModelParams::new(q, x).unwrap()
    }

    #[test]
    fn rates_sum_to_one() {
        let s = BirthDeathSpec::new(&p(0.3, 0.4));
        for k in 0..20 {
            assert!((s.up(k) + s.down(k) + s.stay(k) - 1.0).abs() < 1e-15);
        }
        assert_eq!(s.down(0), 0.0);
    }

    #[test]
    fn matrix_oracle_basics() {
        let pr = p(0.5, 0.5);
        assert_eq!(matrix_transition(3, 3, 0, &pr, 5).unwrap(), 1.0);
        assert_eq!(matrix_transition(3, 2, 0, &pr, 5).unwrap(), 0.0);
        assert!((matrix_transition(3, 4, 1, &pr, 5).unwrap() - 0.25).abs() < 1e-15);
        let chain = TruncatedChain::new(BirthDeathSpec::new(&pr), 30);
        let row = chain.power_row(2, 25);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(matrix_transition(3, 4, 10, &pr, 5).is_err());
    }

    #[test]
    fn spectral_small_cases() {
        let pr = p(0.5, 0.5);
        assert!((km_transition(2, 2, 0, &pr, 1e-12).unwrap() - 1.0).abs() < 1e-9);
        for &(q, x) in &[(0.0, 0.5), (0.3, 0.3), (0.7, 0.5)] {
            let pr = p(q, x);
            let v = km_transition(0, 1, 1, &pr, 1e-12).unwrap();
            assert!((v - pr.c()).abs() < 1e-9);
        }
        let v = km_transition(0, 0, 2, &pr, 1e-12).unwrap();
        let m = matrix_transition(0, 0, 2, &pr, 2).unwrap();
        assert!((v - m).abs() < 1e-8);
    }

    #[test]
    fn spectral_matches_matrix_sample() {
        let pr = p(0.7, 0.3);
        for &(i, j, n) in &[(0, 3, 10), (4, 2, 37), (8, 8, 100), (1, 7, 60)] {
            let a = km_transition(i, j, n, &pr, 1e-11).unwrap();
            let b = matrix_transition(i, j, n, &pr, i + n).unwrap();
            assert!((a - b).abs() < 1e-8, "({i},{j},{n}): {a} vs {b}");
        }
    }

    #[test]
    fn negative_half_is_small() {
        let pr = p(0.3, 0.5);
        for j in 0..5 {
            let v = km_transition_negative_half(0, j, 40, &pr, 1e-14).unwrap();
            assert!(v.abs() < (1.0 - 2.0 * pr.c()).powi(40) * 4f64.powi(j as i32) + 1e-14);
        }
    }

    #[test]
    fn distribution_mean_matches_dp() {
        let d = distribution_after_n(20, &p(0.5, 0.5), None, 1e-14).unwrap();
        let exact = ModelParams::new(
            BigRational::new(1.into(), 2.into()),
            BigRational::new(1.into(), 2.into()),
        )
        .unwrap();
        let e = expected_convoy_dp(20, &exact).unwrap().to_f64();
        assert!((d.mean_gap() - e).abs() < 1e-8, "{} vs {e}", d.mean_gap());
        let q: f64 = 0.5;
        assert!(d.initial_mean < q / ((1.0 - q) * (1.0 - q)));
        let d0 = distribution_after_n(0, &p(0.5, 0.5), None, 1e-14).unwrap();
        let pi = initial_law(0.5, 1e-14).unwrap();
        assert_eq!(&d0.probs[..pi.len()], &pi[..]);
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn half_normal_density() {
        assert!((local_limit_density(0.0, 0.25) - 2.0 / PI.sqrt()).abs() < 1e-12);
        let mass = integrate(|y| local_limit_density(y, 0.21), 0.0, 20.0, QuadOptions::default()).unwrap();
        assert!((mass.value - 1.0).abs() < 1e-10);
        for &y in &[0.0, 0.3, 1.2] {
            let c: f64 = 0.25;
            let cosine = integrate(|u: f64| (-c * u * u).exp() * (y * u).cos(), 0.0, 60.0, QuadOptions::default())
                .unwrap()
                .value
                * 2.0
                / PI;
            assert!((cosine - local_limit_density(y, c)).abs() < 1e-8);
        }
    }

    #[test]
    fn local_limit_matrix_route() {
        let (v, t) = local_limit_check(0.0, 10_000, &p(0.0, 0.5), LocalRoute::Matrix).unwrap();
        assert!((v / t - 1.0).abs() < 0.1, "{v} vs {t}");
        let (v, t) = local_limit_check(4.0, 10_000, &p(0.5, 0.5), LocalRoute::Matrix).unwrap();
        assert!(v < 1e-3 && t < 1e-3);
    }

    #[test]
    fn local_limit_spectral_route() {
        let (v, t) = local_limit_check(0.5, 10_000, &p(0.5, 0.5), LocalRoute::Spectral).unwrap();
        assert!((v / t - 1.0).abs() < 0.1, "{v} vs {t}");
    }
}
