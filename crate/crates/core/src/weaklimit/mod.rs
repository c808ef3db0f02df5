//! The weakly asymmetric regime `q_n = exp(-gamma/sqrt(n))`: the limiting
//! law of the rescaled first queue, the kernel `J(z, w)`, the joint limit
//! density of `(X, Y)` and the expected gap `E[Y - X]`.
//!
//! Most routines work with the phase-normalised kernel
//! `Jh(z, w) = J(z, w) |Gamma(ia)| / |Gamma(2ia)|`, `a = w/gamma`, which stays
//! of order one where `J` itself decays like `exp(-pi a / 2)`. In terms of
//! `eta = exp(-gamma z)/gamma`,
//!
//! ```text
//! Jh = 2 Re[ exp(i(psi(a) - a ln eta)) 1F1(1 - ia; 1 - 2ia; -eta) ],
//! psi(a) = arg Gamma(2ia) - arg Gamma(ia).
//! ```

pub mod special;

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::qhermite::h_eval;
use crate::qseries::{ln_qpoch_infinite, q_gamma};
use crate::quad::{composite_kronrod, integrate_with_breaks, QuadOptions, QuadResult};

pub use special::{complex_gamma, hyp1f1, hyp1f1_series, ln_gamma};

/// Past this `eta` the kernel is below `eta exp(-eta)` and is returned as 0.
const ETA_CUTOFF: f64 = 60.0;

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("gamma must be positive, got {gamma}")))
    }
}

fn check_c(c: f64) -> Result<()> {
    if c > 0.0 && c <= 0.25 {
        Ok(())
    } else {
        Err(domain(format!("c must lie in (0, 1/4], got {c}")))
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("tolerance must lie in (0,1), got {tol}")))
    }
}

/// Scaling data for a fixed `gamma` and system size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakScaling {
    gamma: f64,
    n: u64,
}

impl WeakScaling {
    pub fn new(gamma: f64, n: u64) -> Result<Self> {
        check_gamma(gamma)?;
        if n == 0 {
            return Err(domain("n must be positive"));
        }
        Ok(Self { gamma, n })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    fn sqrt_n(&self) -> f64 {
        (self.n as f64).sqrt()
    }

    /// `q_n = exp(-gamma / sqrt(n))`.
    pub fn q_n(&self) -> f64 {
        (-self.gamma / self.sqrt_n()).exp()
    }

    /// `m_n(z) = floor(z sqrt(n) + (sqrt(n)/gamma) ln sqrt(n))`.
    pub fn m_n(&self, z: f64) -> i64 {
        let s = self.sqrt_n();
        (z * s + s / self.gamma * s.ln()).floor() as i64
    }
}

/// `eta(z) = exp(-gamma z) / gamma`.
pub fn eta(z: f64, gamma: f64) -> f64 {
    (-gamma * z).exp() / gamma
}

/// `((q_n^{m_n(z)}; q_n)_inf, exp(-eta(z)))`.
pub fn qpoch_scaling_limit(z: f64, gamma: f64, n: u64) -> Result<(f64, f64)> {
    let s = WeakScaling::new(gamma, n)?;
    let limit = (-eta(z, gamma)).exp();
    let m = s.m_n(z);
    if m <= 0 {
        // The product contains the factor 1 - q^0.
        return Ok((0.0, limit));
    }
    let q = s.q_n();
    let a = (m as f64 * q.ln()).exp();
    Ok((ln_qpoch_infinite(a, q, 1e-14)?.exp(), limit))
}

/// Limiting density of `X`: `exp(-gamma x) exp(-exp(-gamma x)/gamma)`.
pub fn density_x(x: f64, gamma: f64) -> f64 {
    (-gamma * x - eta(x, gamma)).exp()
}

/// Numerical mass of [`density_x`].
pub fn density_x_mass(gamma: f64) -> Result<QuadResult> {
    check_gamma(gamma)?;
    let lo = -(40.0 * gamma).ln() / gamma;
    let hi = -(1e-15 * gamma).ln() / gamma;
    let mode = -gamma.ln() / gamma;
    let width = 1.0 / gamma;
    let mut pts = vec![lo];
    let mut t = mode - 4.0 * width;
    while t < hi {
        if t > lo {
            pts.push(t);
        }
        t += width;
    }
    pts.push(hi);
    let opts = QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-13,
        max_intervals: 4000,
    };
    integrate_with_breaks(|x| density_x(x, gamma), &pts, opts)
}

/// `(sqrt(n) P(Q_1 = m_n(x)), density_x(x))` under the stationary initial
/// law `P(Q_1 = m) = q^m (q^{m+1}; q)_inf`.
pub fn initial_local_law(x: f64, gamma: f64, n: u64) -> Result<(f64, f64)> {
    let s = WeakScaling::new(gamma, n)?;
    let limit = density_x(x, gamma);
    let m = s.m_n(x);
    if m < 0 {
        return Ok((0.0, limit));
    }
    let q = s.q_n();
    let ln_q = q.ln();
    let ln_p = m as f64 * ln_q + ln_qpoch_infinite(((m + 1) as f64 * ln_q).exp(), q, 1e-14)?;
    Ok((s.sqrt_n() * ln_p.exp(), limit))
}

/// `psi(a) = Im(ln Gamma(2ia) - ln Gamma(ia))`, the phase of the Gamma ratio.
pub fn phase_shift(a: f64) -> Result<f64> {
    if a == 0.0 {
        return Ok(0.0);
    }
    let d = ln_gamma(Complex64::new(0.0, 2.0 * a))? - ln_gamma(Complex64::new(0.0, a))?;
    Ok(d.im)
}

/// One spectral mode `a = w/gamma` with its Gamma-ratio phase precomputed.
#[derive(Debug, Clone, Copy)]
struct Mode {
    a: f64,
    psi: f64,
}

impl Mode {
    fn new(a: f64) -> Result<Self> {
        Ok(Self { a, psi: phase_shift(a)? })
    }

    /// `Jh` as a function of `eta`.
    fn eval(&self, eta: f64) -> Result<f64> {
        if eta > ETA_CUTOFF {
            return Ok(0.0);
        }
        if self.a == 0.0 {
            return Ok(2.0 * (-eta).exp());
        }
        let a = self.a;
        let m = hyp1f1(Complex64::new(1.0, -a), Complex64::new(1.0, -2.0 * a), Complex64::new(-eta, 0.0))?;
        let phase = Complex64::from_polar(1.0, self.psi - a * eta.ln());
        Ok(2.0 * (phase * m).re)
    }
}

fn check_w(w: f64) -> Result<()> {
    if w >= 0.0 && w.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("w must be nonnegative, got {w}")))
    }
}

/// The kernel `J(z, w) = 2 Re[(gamma e^{gamma z})^{iw/gamma} Gamma(2iw/gamma)/Gamma(iw/gamma)
/// 1F1(1 - iw/gamma; 1 - 2iw/gamma; -e^{-gamma z}/gamma)]`; `J(z, 0) = exp(-eta)`.
pub fn j_kernel(z: f64, w: f64, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    check_w(w)?;
    let e = eta(z, gamma);
    if w == 0.0 {
        return Ok((-e).exp());
    }
    let a = w / gamma;
    let ln_rho = (ln_gamma(Complex64::new(0.0, 2.0 * a))? - ln_gamma(Complex64::new(0.0, a))?).re;
    Ok(ln_rho.exp() * Mode::new(a)?.eval(e)?)
}

/// The normalised kernel `Jh(z, w)`; `Jh(z, 0) = 2 exp(-eta)`.
pub fn j_kernel_normalized(z: f64, w: f64, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    check_w(w)?;
    Mode::new(w / gamma)?.eval(eta(z, gamma))
}

/// `(exp(-eta) H_{m_n(z)}(cos(w/sqrt n) | q_n), J(z, w))`.
pub fn finite_n_kernel(z: f64, w: f64, scaling: &WeakScaling) -> Result<(f64, f64)> {
    let gamma = scaling.gamma();
    let m = scaling.m_n(z);
    if m < 0 {
        return Err(domain(format!("m_n(z) = {m} is negative; increase n or z")));
    }
    let x = (w / scaling.sqrt_n()).cos();
    let h = h_eval::<f64>(m as usize, &x, &scaling.q_n());
    Ok(((-eta(z, gamma)).exp() * h, j_kernel(z, w, gamma)?))
}

/// `min` and `max` over `xs` of `|Gamma_q(1 + ix)|^2 / (e^{x^2/sqrt n} pi x / sinh(pi x))`
/// at `q = exp(-2/sqrt n)`.
pub fn q_gamma_modulus_bracket(n: u64, xs: &[f64]) -> Result<(f64, f64)> {
    if n == 0 || xs.is_empty() {
        return Err(domain("need n > 0 and at least one abscissa"));
    }
    let sn = (n as f64).sqrt();
    let q = (-2.0 / sn).exp();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in xs {
        if !(x > 0.0) {
            return Err(domain("abscissae must be positive"));
        }
        let g = q_gamma(Complex64::new(1.0, x), q, 1e-14)?;
        let reference = (x * x / sn).exp() * PI * x / (PI * x).sinh();
        let r = g.norm_sqr() / reference;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

/// `w` cutoff so that `exp(-c W^2)` is below `tol / 8`.
fn gaussian_cutoff(c: f64, tol: f64) -> f64 {
    ((8.0 / tol).ln() / c).sqrt()
}

/// Largest `a` worth keeping when a factor `I(a) ~ 4 pi a exp(-pi a/2)` is present.
fn spectral_cutoff(tol: f64) -> f64 {
    let mut a = 1.0;
    while 4.0 * PI * a * (-PI * a / 2.0).exp() > tol * 1e-2 {
        a += 0.5;
    }
    a
}

/// Extra phase rate of `psi(w/gamma)` in `w` on `[0, W]`.
fn psi_rate(w_max: f64, gamma: f64) -> f64 {
    (4.0 * w_max / gamma).ln().max(0.0) / gamma
}

/// Panels of width at most `pi / (2 (1 + rate))` on `[0, W]`.
fn panel_count(w_max: f64, rate: f64) -> usize {
    let h = PI / (2.0 * (1.0 + rate));
    (w_max / h).ceil().max(1.0) as usize
}

/// Evaluator for the joint limit density
/// `f(x, y) = (1/2 pi) e^{-gamma x} int_0^inf e^{-c w^2} Jh(x, w) Jh(y, w) dw`.
#[derive(Debug, Clone, Copy)]
pub struct JointDensity {
    gamma: f64,
    c: f64,
    tol: f64,
    w_max: f64,
}

/// The joint density at fixed `x`, sharing the `w` nodes across many `y`.
#[derive(Debug, Clone)]
pub struct KernelRow {
    gamma: f64,
    modes: Vec<Mode>,
    /// `wk e^{-c w^2} Jh(x, w) e^{-gamma x} / 2 pi` and the Gauss counterpart.
    kronrod: Vec<f64>,
    gauss: Vec<f64>,
    truncation: f64,
}

impl JointDensity {
    pub fn new(gamma: f64, c: f64, tol: f64) -> Result<Self> {
        check_gamma(gamma)?;
        check_c(c)?;
        check_tol(tol)?;
        Ok(Self {
            gamma,
            c,
            tol,
            w_max: gaussian_cutoff(c, tol),
        })
    }

    /// Prepares the `w` quadrature for `x`, valid for any `y` with
    /// `|y + ln(gamma)/gamma| <= y_reach`.
    pub fn row(&self, x: f64, y_reach: f64) -> Result<KernelRow> {
        let shift = self.gamma.ln() / self.gamma;
        let rate = (x + shift).abs() + y_reach.abs() + 2.0 * psi_rate(self.w_max, self.gamma);
        let panels = panel_count(self.w_max, rate);
        let (ws, wk, wg) = composite_kronrod(0.0, self.w_max, panels);
        let ex = eta(x, self.gamma);
        let pref = self.gamma * ex / (2.0 * PI);
        let rows: Vec<(Mode, f64)> = ws
            .par_iter()
            .map(|&w| {
                let mode = Mode::new(w / self.gamma)?;
                let g = (-self.c * w * w).exp() * mode.eval(ex)?;
                Ok((mode, g))
            })
            .collect::<Result<_>>()?;
        let modes = rows.iter().map(|r| r.0).collect();
        let kronrod = rows.iter().zip(&wk).map(|(r, w)| pref * w * r.1).collect();
        let gauss = rows.iter().zip(&wg).map(|(r, w)| pref * w * r.1).collect();
        Ok(KernelRow {
            gamma: self.gamma,
            modes,
            kronrod,
            gauss,
            // |Jh| <= 2 beyond the cutoff (in practice much smaller).
            truncation: pref * 4.0 * self.tol / 8.0,
        })
    }

    pub fn density(&self, x: f64, y: f64) -> Result<QuadResult> {
        let shift = self.gamma.ln() / self.gamma;
        self.row(x, (y + shift).abs())?.at(y)
    }
}

impl KernelRow {
    pub fn at(&self, y: f64) -> Result<QuadResult> {
        let ey = eta(y, self.gamma);
        let mut k = 0.0;
        let mut g = 0.0;
        for ((mode, wk), wg) in self.modes.iter().zip(&self.kronrod).zip(&self.gauss) {
            let j = mode.eval(ey)?;
            k += wk * j;
            g += wg * j;
        }
        Ok(QuadResult {
            value: k,
            error: (k - g).abs() + self.truncation,
            intervals: self.modes.len() / 15,
        })
    }
}

/// Pointwise joint density; see [`JointDensity`].
pub fn joint_density(x: f64, y: f64, gamma: f64, c: f64, tol: f64) -> Result<QuadResult> {
    JointDensity::new(gamma, c, tol)?.density(x, y)
}

/// `y` range carrying all but a negligible part of the mass of `Y`.
fn y_range(gamma: f64, c: f64, centre: f64) -> (f64, f64) {
    let lo = -(40.0 * gamma).ln() / gamma;
    let hi = centre.max(-gamma.ln() / gamma).max(0.0) + 2.0 + 8.0 * (2.0 * c).sqrt();
    (lo, hi)
}

fn panel_nodes(lo: f64, hi: f64, width: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let panels = ((hi - lo) / width).ceil().max(1.0) as usize;
    composite_kronrod(lo, hi, panels)
}

/// `int f(x, y) dy`, which should reproduce [`density_x`].
pub fn joint_marginal_x(x: f64, gamma: f64, c: f64, tol: f64) -> Result<QuadResult> {
    let jd = JointDensity::new(gamma, c, tol)?;
    let (lo, hi) = y_range(gamma, c, x);
    let shift = gamma.ln() / gamma;
    let reach = (lo + shift).abs().max((hi + shift).abs());
    let row = jd.row(x, reach)?;
    let (ys, wk, wg) = panel_nodes(lo, hi, 0.1);
    let vals: Vec<QuadResult> = ys.par_iter().map(|&y| row.at(y)).collect::<Result<_>>()?;
    let value: f64 = vals.iter().zip(&wk).map(|(v, w)| w * v.value).sum();
    let gauss: f64 = vals.iter().zip(&wg).map(|(v, w)| w * v.value).sum();
    let inner: f64 = vals.iter().zip(&wk).map(|(v, w)| w * v.error).sum();
    Ok(QuadResult {
        value,
        error: (value - gauss).abs() + inner,
        intervals: ys.len() / 15,
    })
}

/// `I(a) = int_0^inf Jh(eta) d eta = int_{-inf}^{inf} e^{-gamma y} Jh(y, gamma a) dy`.
pub fn spectral_transform(a: f64, tol: f64) -> Result<QuadResult> {
    check_tol(tol)?;
    if !(a >= 0.0 && a.is_finite()) {
        return Err(domain(format!("spectral variable must be nonnegative, got {a}")));
    }
    let mode = Mode::new(a)?;
    // Substituting eta = e^u; below u_lo the integrand is at most 2.1 e^u.
    let lo = (tol / 4.0).ln();
    let hi = ETA_CUTOFF.ln();
    let step = PI / (a + 1.0);
    let mut pts = vec![lo];
    let mut u = lo + step;
    while u < hi {
        pts.push(u);
        u += step;
    }
    pts.push(hi);
    let mut failure = None;
    let opts = QuadOptions {
        abs_tol: tol / 2.0,
        rel_tol: 0.0,
        max_intervals: 20_000,
    };
    let mut r = integrate_with_breaks(
        |u| match mode.eval(u.exp()) {
            Ok(v) => u.exp() * v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        &pts,
        opts,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    r.error += 2.1 * lo.exp();
    Ok(r)
}

/// `E[Y - X] = (1/2 pi) int_0^inf (1 - e^{-c w^2}) / w^2 I(w/gamma)^2 dw`,
/// integrated in `a = w/gamma` with `I` computed by [`spectral_transform`].
pub fn expected_gap(gamma: f64, c: f64, tol: f64) -> Result<QuadResult> {
    check_gamma(gamma)?;
    check_c(c)?;
    check_tol(tol)?;
    let a_max = spectral_cutoff(tol);
    let inner_tol = (tol * 1e-2).max(1e-14);
    let scale = 1.0 / (gamma * c.sqrt());
    let mut pts = vec![0.0];
    for k in 1..=8 {
        let p = scale * k as f64 * 0.5;
        if p < a_max {
            pts.push(p);
        }
    }
    let mut t = 0.5;
    while t < a_max {
        if t > *pts.last().unwrap() {
            pts.push(t);
        }
        t += 0.5;
    }
    pts.push(a_max);
    let mut failure = None;
    let mut inner_err = 0.0f64;
    let pref = gamma / (2.0 * PI);
    let opts = QuadOptions {
        abs_tol: tol / pref / 2.0,
        rel_tol: 0.0,
        max_intervals: 4000,
    };
    let r = integrate_with_breaks(
        |a| {
            let t = c * gamma * gamma * a * a;
            let h = if t == 0.0 { 1.0 } else { -(-t).exp_m1() / t };
            match spectral_transform(a, inner_tol) {
                Ok(i) => {
                    inner_err = inner_err.max(2.0 * i.value.abs() * i.error * c * h);
                    c * h * i.value * i.value
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        &pts,
        opts,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(QuadResult {
        value: pref * r.value,
        error: pref * (r.error + inner_err * a_max),
        intervals: r.intervals,
    })
}

/// Evaluator for the `Y` marginal
/// `f_Y(y) = (1/2 pi) int_0^inf e^{-c w^2} I(w/gamma) Jh(y, w) dw`.
#[derive(Debug, Clone)]
pub struct YMarginal {
    gamma: f64,
    modes: Vec<Mode>,
    kronrod: Vec<f64>,
    gauss: Vec<f64>,
    error: f64,
}

impl YMarginal {
    /// Valid for `|y + ln(gamma)/gamma| <= y_reach`.
    pub fn new(gamma: f64, c: f64, y_reach: f64, tol: f64) -> Result<Self> {
        check_gamma(gamma)?;
        check_c(c)?;
        check_tol(tol)?;
        let w_max = gaussian_cutoff(c, tol).min(gamma * spectral_cutoff(tol));
        let rate = y_reach.abs() + psi_rate(w_max, gamma);
        let (ws, wk, wg) = composite_kronrod(0.0, w_max, panel_count(w_max, rate));
        let inner_tol = (tol * 1e-2).max(1e-14);
        let rows: Vec<(Mode, f64, f64)> = ws
            .par_iter()
            .map(|&w| {
                let a = w / gamma;
                let i = spectral_transform(a, inner_tol)?;
                let g = (-c * w * w).exp() / (2.0 * PI);
                Ok((Mode::new(a)?, g * i.value, g * i.error))
            })
            .collect::<Result<_>>()?;
        let error = rows.iter().zip(&wk).map(|(r, w)| 2.0 * w * r.2).sum::<f64>() + tol;
        Ok(Self {
            gamma,
            modes: rows.iter().map(|r| r.0).collect(),
            kronrod: rows.iter().zip(&wk).map(|(r, w)| w * r.1).collect(),
            gauss: rows.iter().zip(&wg).map(|(r, w)| w * r.1).collect(),
            error,
        })
    }

    pub fn at(&self, y: f64) -> Result<QuadResult> {
        let ey = eta(y, self.gamma);
        let mut k = 0.0;
        let mut g = 0.0;
        for ((mode, wk), wg) in self.modes.iter().zip(&self.kronrod).zip(&self.gauss) {
            let j = mode.eval(ey)?;
            k += wk * j;
            g += wg * j;
        }
        Ok(QuadResult {
            value: k,
            error: (k - g).abs() + self.error,
            intervals: self.modes.len() / 15,
        })
    }
}

/// Comparison of the `Y` marginal with the half-normal law of variance `2c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalCheck {
    pub gamma: f64,
    pub c: f64,
    /// `int |f_Y - half-normal|`.
    pub l1: f64,
    pub mass: f64,
    pub mean: f64,
    pub half_normal_mean: f64,
}

pub fn marginal_y_limit_check(gamma: f64, c: f64) -> Result<MarginalCheck> {
    let tol = 1e-10;
    let (lo, hi) = y_range(gamma, c, 0.0);
    let shift = gamma.ln() / gamma;
    let reach = (lo + shift).abs().max((hi + shift).abs());
    let ym = YMarginal::new(gamma, c, reach, tol)?;
    // Split at 0 where the half-normal density jumps.
    let (mut ys, mut ws, _) = panel_nodes(lo.min(-1e-3), 0.0, 0.05);
    let (ys2, ws2, _) = panel_nodes(0.0, hi, 0.05);
    ys.extend(ys2);
    ws.extend(ws2);
    let vals: Vec<f64> = ys
        .par_iter()
        .map(|&y| ym.at(y).map(|r| r.value))
        .collect::<Result<_>>()?;
    let half_normal = |y: f64| {
        if y < 0.0 {
            0.0
        } else {
            2.0 * (-y * y / (4.0 * c)).exp() / (4.0 * PI * c).sqrt()
        }
    };
    let mut out = MarginalCheck {
        gamma,
        c,
        l1: 0.0,
        mass: 0.0,
        mean: 0.0,
        half_normal_mean: (4.0 * c / PI).sqrt(),
    };
    for ((y, w), f) in ys.iter().zip(&ws).zip(&vals) {
        out.l1 += w * (f - half_normal(*y)).abs();
        out.mass += w * f;
        out.mean += w * y * f;
    }
    Ok(out)
}

/// A density sampled on a grid, with per-point error estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub abscissae: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
}

impl DensityGrid {
    /// Evaluates `f` on `points` in parallel. Values that are negative beyond
    /// their error estimate are rejected; the rest are clipped at zero.
    pub fn evaluate<F>(points: Vec<f64>, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<QuadResult> + Sync,
    {
        let res: Vec<QuadResult> = points.par_iter().map(|&x| f(x)).collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(res.len());
        let mut errors = Vec::with_capacity(res.len());
        for (x, r) in points.iter().zip(&res) {
            if r.value < -(r.error + 1e-12) {
                return Err(Error::Numeric {
                    message: format!("density {:e} at {x} is negative beyond its error", r.value),
                    achieved: r.error,
                });
            }
            values.push(r.value.max(0.0));
            errors.push(r.error);
        }
        Ok(Self {
            abscissae: points,
            values,
            errors,
        })
    }

    /// `n` equally spaced points on `[lo, hi]`.
    pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        if n < 2 {
            return vec![lo];
        }
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    /// Trapezoid mass and its accumulated pointwise error.
    pub fn trapezoid_mass(&self) -> (f64, f64) {
        let mut mass = 0.0;
        let mut err = 0.0;
        for i in 1..self.abscissae.len() {
            let h = self.abscissae[i] - self.abscissae[i - 1];
            mass += 0.5 * h * (self.values[i] + self.values[i - 1]);
            err += 0.5 * h * (self.errors[i] + self.errors[i - 1]);
        }
        (mass, err)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("abscissa,value,err\n");
        for ((x, v), e) in self.abscissae.iter().zip(&self.values).zip(&self.errors) {
            s.push_str(&format!("{x:.16e},{v:.16e},{e:.16e}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `I(a) = 4 pi a rho(a) coth(pi a)` with `rho^2 = 1/(4 cosh(pi a))`.
    fn spectral_closed(a: f64) -> f64 {
        if a == 0.0 {
            return 2.0;
        }
        let rho = 1.0 / (4.0 * (PI * a).cosh()).sqrt();
        4.0 * PI * a * rho / (PI * a).tanh()
    }

    /// `E[Y - X] = (2 pi/gamma) int_0^inf (1 - e^{-c gamma^2 a^2}) cosh(pi a)/sinh^2(pi a) da`.
    fn gap_closed(gamma: f64, c: f64) -> f64 {
        let f = |a: f64| {
            if a == 0.0 {
                return c * gamma * gamma / (PI * PI);
            }
            let s = (PI * a).sinh();
            -(-c * gamma * gamma * a * a).exp_m1() * (PI * a).cosh() / (s * s)
        };
        let r = crate::quad::integrate(f, 0.0, 40.0, QuadOptions::default()).unwrap();
        2.0 * PI / gamma * r.value
    }

    #[test]
    fn scaling_helpers() {
        let s = WeakScaling::new(1.0, 10_000).unwrap();
        assert!((s.q_n() - (-0.01f64).exp()).abs() < 1e-16);
        assert_eq!(s.m_n(0.0), (100.0 * 100f64.ln()).floor() as i64);
        assert!(s.m_n(0.3) >= s.m_n(0.2));
        assert!(WeakScaling::new(0.0, 5).is_err());
    }

    #[test]
    fn qpoch_scaling_gap_shrinks() {
        let mut prev = f64::INFINITY;
        for n in [10_000u64, 100_000, 1_000_000] {
            let (v, l) = qpoch_scaling_limit(0.0, 1.0, n).unwrap();
            assert!((l - (-1f64).exp()).abs() < 1e-15);
            let gap = (v - l).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-2);
        let (v, l) = qpoch_scaling_limit(1.0, 2.0, 1_000_000).unwrap();
        assert!((l - (-(-2f64).exp() / 2.0).exp()).abs() < 1e-15);
        assert!((v - l).abs() < 1e-2);
        let (v, l) = qpoch_scaling_limit(50.0, 1.0, 1_000_000).unwrap();
        assert!((v - 1.0).abs() < 1e-12 && (l - 1.0).abs() < 1e-12);
    }

    #[test]
    fn limiting_initial_density() {
        assert!((density_x(0.0, 1.0) - (-1f64).exp()).abs() < 1e-15);
        for gamma in [0.5, 1.0, 2.0, 8.0] {
            let m = density_x_mass(gamma).unwrap();
            assert!((m.value - 1.0).abs() < 1e-8, "gamma={gamma}: {}", m.value);
            let mode = -gamma.ln() / gamma;
            assert!(density_x(mode, gamma) > density_x(mode + 0.01, gamma));
            assert!(density_x(mode, gamma) > density_x(mode - 0.01, gamma));
        }
        for x in [-1.0, 0.0, 0.5, 1.5] {
            let (v, l) = initial_local_law(x, 1.0, 1_000_000).unwrap();
            assert!((v - l).abs() < 5e-2, "x={x}: {v} vs {l}");
        }
    }

    #[test]
    fn kernel_at_zero_and_reality() {
        assert!((j_kernel(0.0, 0.0, 1.0).unwrap() - (-1f64).exp()).abs() < 1e-15);
        // Small w approaches the w = 0 value continuously.
        let v = j_kernel(0.3, 1e-6, 1.5).unwrap();
        assert!((v - (-eta(0.3, 1.5)).exp()).abs() < 1e-5);
        // The two conjugate terms sum to a real number.
        for &(z, w, gamma) in &[(0.0, 1.0, 1.0), (-0.7, 2.5, 2.0), (1.3, 0.4, 0.5)] {
            let e = eta(z, gamma);
            let term = |s: f64| {
                let ia = Complex64::new(0.0, s * w / gamma);
                let pre = (ia * (gamma.ln() + gamma * z)).exp();
                let ratio = complex_gamma(2.0 * ia).unwrap() / complex_gamma(ia).unwrap();
                pre * ratio * hyp1f1(1.0 - ia, 1.0 - 2.0 * ia, Complex64::new(-e, 0.0)).unwrap()
            };
            let pair = term(1.0) + term(-1.0);
            assert!(pair.im.abs() < 1e-12);
            assert!((pair.re - j_kernel(z, w, gamma).unwrap()).abs() < 1e-12);
        }
        assert!(j_kernel(0.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn finite_n_kernel_converges() {
        let s = WeakScaling::new(2.0, 40_000).unwrap();
        let (finite, limit) = finite_n_kernel(0.0, 1.0, &s).unwrap();
        assert!((finite - limit).abs() < 0.05, "{finite} vs {limit}");
    }

    #[test]
    fn q_gamma_bracket_is_tight() {
        let xs: Vec<f64> = (0..=18).map(|k| 0.5 + 0.25 * k as f64).collect();
        let (lo, hi) = q_gamma_modulus_bracket(1_000_000, &xs).unwrap();
        assert!(0.9 < lo && lo <= hi && hi < 1.1, "[{lo}, {hi}]");
    }

    #[test]
    fn spectral_transform_matches_closed_form() {
        for a in [0.0, 0.05, 0.5, 1.0, 3.0, 8.0] {
            let r = spectral_transform(a, 1e-11).unwrap();
            assert!((r.value - spectral_closed(a)).abs() < 1e-9, "a={a}: {} vs {}", r.value, spectral_closed(a));
        }
    }

    #[test]
    fn joint_density_symmetry() {
        let jd = JointDensity::new(1.0, 0.25, 1e-12).unwrap();
        for &(x, y) in &[(0.0, 0.5), (-0.8, 1.2), (0.4, -0.3)] {
            let fxy = jd.density(x, y).unwrap().value;
            let fyx = jd.density(y, x).unwrap().value;
            assert!((fxy * x.exp() - fyx * y.exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn joint_marginal_reproduces_initial_density() {
        for x in [-1.0, 0.0, 1.0] {
            let r = joint_marginal_x(x, 1.0, 0.25, 1e-12).unwrap();
            assert!((r.value - density_x(x, 1.0)).abs() < 1e-3, "x={x}: {} vs {}", r.value, density_x(x, 1.0));
        }
    }

    #[test]
    fn expected_gap_matches_closed_form() {
        for gamma in [0.05, 1.0, 8.0] {
            let g = expected_gap(gamma, 0.25, 1e-9).unwrap();
            let want = gap_closed(gamma, 0.25);
            assert!((g.value - want).abs() < 1e-7, "gamma={gamma}: {} vs {want}", g.value);
        }
    }

    #[test]
    fn expected_gap_trend_and_limits() {
        let gammas = [0.1, 0.5, 1.0, 2.0, 8.0];
        let gaps: Vec<f64> = gammas.iter().map(|&g| expected_gap(g, 0.25, 1e-9).unwrap().value).collect();
        assert!(gaps.windows(2).all(|w| w[1] > w[0]), "{gaps:?}");
        assert!((gaps[4] - (1.0 / PI).sqrt()).abs() < 0.1 * (1.0 / PI).sqrt());
        assert!(expected_gap(0.05, 0.25, 1e-9).unwrap().value < 0.1);
    }

    #[test]
    fn y_marginal_approaches_half_normal_slowly() {
        // The approach is O(ln(gamma)/gamma): E[X] = (euler_gamma - ln gamma)/gamma
        // is still -0.19 at gamma = 8.
        let m8 = marginal_y_limit_check(8.0, 0.25).unwrap();
        let m16 = marginal_y_limit_check(16.0, 0.25).unwrap();
        assert!(m16.l1 < m8.l1);
        assert!((m8.mass - 1.0).abs() < 1e-6);
        let ex = (0.577_215_664_901_532_9 - 8f64.ln()) / 8.0;
        let gap = expected_gap(8.0, 0.25, 1e-9).unwrap().value;
        assert!((m8.mean - (ex + gap)).abs() < 1e-6, "{} vs {}", m8.mean, ex + gap);
    }

    #[test]
    fn y_marginal_has_unit_mass() {
        let m = marginal_y_limit_check(1.0, 0.25).unwrap();
        assert!((m.mass - 1.0).abs() < 1e-3, "{m:?}");
    }

    #[test]
    fn density_grid_csv() {
        let g = DensityGrid::evaluate(DensityGrid::linspace(-3.0, 8.0, 221), |x| {
            Ok(QuadResult {
                value: density_x(x, 1.0),
                error: 0.0,
                intervals: 0,
            })
        })
        .unwrap();
        let (m, _) = g.trapezoid_mass();
        assert!((m - 1.0).abs() < 1e-2);
        let csv = g.to_csv();
        assert!(csv.starts_with("abscissa,value,err\n"));
        assert_eq!(csv.lines().count(), 222);
    }
}
