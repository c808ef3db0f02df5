//! Monte Carlo of the inhomogeneous queue with convoy marks, coupled to a
//! free random walk, plus exact path identities.
//!
//! # Random streams
//!
//! Replica `r` of a run with root seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` switched to stream `r`. Each step consumes
//! exactly two `f64` uniforms and each initial level one, so results depend
//! only on `(seed, replica index, n, params)`, never on thread scheduling.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{domain, Error, Result};
use crate::kmtrans::initial_law;
use crate::moments::ModelParams;
use crate::qseries::check_q;
use crate::scalar::Scalar;

/// Residual CDF mass below which the initial law is cut off.
pub const PI_RESIDUAL: f64 = 1e-14;

/// The random stream of replica `r`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Inverse-CDF sampler for `pi_k = (q;q)_inf q^k / (q;q)_k`.
#[derive(Debug, Clone)]
pub struct PiSampler {
    cdf: Vec<f64>,
}

impl PiSampler {
    pub fn new(q: f64) -> Result<Self> {
        check_q(q)?;
        let law = initial_law(q, PI_RESIDUAL)?;
        let mut acc = 0.0;
        let cdf = law
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { cdf })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.cdf.len() - 1) as u64
    }

    /// `sum_k k pi_k` over the retained support.
    pub fn mean(&self) -> f64 {
        let mut prev = 0.0;
        let mut m = 0.0;
        for (k, &c) in self.cdf.iter().enumerate() {
            m += k as f64 * (c - prev);
            prev = c;
        }
        m
    }
}

/// One draw of `Q_1`.
pub fn sample_pi<R: Rng + ?Sized>(q: f64, rng: &mut R) -> Result<u64> {
    Ok(PiSampler::new(q)?.sample(rng))
}

/// Queue level `k` before step `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueState {
    pub level: u64,
    pub step: u64,
}

/// Queue level, free-walk level and number of convoy marks so far.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupledState {
    pub queue: u64,
    pub walk: i64,
    pub convoy: u64,
}

impl CoupledState {
    /// Both chains start at the same level, with no marks.
    pub fn start(level: u64) -> Self {
        Self {
            queue: level,
            walk: level as i64,
            convoy: 0,
        }
    }

    pub fn coupling_holds(&self) -> bool {
        self.convoy as i64 == self.queue as i64 - self.walk
    }
}

/// Precomputed `q^k` table and `c` for fast stepping.
#[derive(Debug, Clone)]
pub struct CoupledStepper {
    c: f64,
    qpow: Vec<f64>,
}

impl CoupledStepper {
    pub fn new(params: &ModelParams<f64>) -> Self {
        let q = *params.q();
        let mut qpow = vec![1.0];
        let mut p = 1.0;
        while p > 0.0 && qpow.len() < 1_000_000 {
            p *= q;
            qpow.push(p);
        }
        Self { c: *params.c(), qpow }
    }

    fn qk(&self, k: u64) -> f64 {
        self.qpow.get(k as usize).copied().unwrap_or(0.0)
    }

    /// Advances with explicit uniforms `r` (shared driver) and `u` (rejection
    /// draw). Returns whether a convoy mark was set.
    pub fn step_with(&self, s: &mut CoupledState, r: f64, u: f64) -> bool {
        if r < self.c {
            s.queue += 1;
            s.walk += 1;
            false
        } else if r < 1.0 - self.c {
            false
        } else {
            s.walk -= 1;
            if u < self.qk(s.queue) {
                s.convoy += 1;
                true
            } else {
                s.queue -= 1;
                false
            }
        }
    }

    pub fn step<R: Rng + ?Sized>(&self, s: &mut CoupledState, rng: &mut R) -> bool {
        let r: f64 = rng.random();
        let u: f64 = rng.random();
        self.step_with(s, r, u)
    }
}

/// A single coupled step; see [`CoupledStepper`] for repeated use.
pub fn step_coupled<R: Rng + ?Sized>(state: &mut CoupledState, params: &ModelParams<f64>, rng: &mut R) -> bool {
    let r: f64 = rng.random();
    let u: f64 = rng.random();
    let q = *params.q();
    let c = *params.c();
    if r < c {
        state.queue += 1;
        state.walk += 1;
        false
    } else if r < 1.0 - c {
        false
    } else {
        state.walk -= 1;
        if u < q.powi(state.queue.min(i32::MAX as u64) as i32) {
            state.convoy += 1;
            true
        } else {
            state.queue -= 1;
            false
        }
    }
}

/// Runs replica `r`: `Q_1 ~ pi`, then `n` coupled steps. Panics if the
/// coupling identity ever fails, which would be an arithmetic bug.
pub fn run_replica(n: usize, stepper: &CoupledStepper, sampler: &PiSampler, seed: u64, replica: u64) -> CoupledState {
    let mut rng = replica_rng(seed, replica);
    let mut s = CoupledState::start(sampler.sample(&mut rng));
    for _ in 0..n {
        stepper.step(&mut s, &mut rng);
        assert!(s.coupling_holds(), "coupling identity violated: {s:?}");
    }
    s
}

/// Final convoy counts of replicas `range`, in replica order.
pub fn convoy_samples(n: usize, params: &ModelParams<f64>, seed: u64, range: std::ops::Range<u64>) -> Result<Vec<u64>> {
    let stepper = CoupledStepper::new(params);
    let sampler = PiSampler::new(*params.q())?;
    Ok(range
        .into_par_iter()
        .map(|r| run_replica(n, &stepper, &sampler, seed, r).convoy)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub q: f64,
    pub x: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub count: u64,
    pub freq: u64,
}

/// Aggregated Monte Carlo output; `histogram` holds raw convoy counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub params: SimParams,
    pub n: usize,
    pub reps: u64,
    pub seed: u64,
    pub mean: f64,
    pub stderr: f64,
    pub histogram: Vec<HistogramBin>,
}

impl SimSummary {
    pub fn from_counts(params: &ModelParams<f64>, n: usize, seed: u64, counts: &[u64]) -> Self {
        let mut hist = BTreeMap::new();
        for &c in counts {
            *hist.entry(c).or_insert(0u64) += 1;
        }
        Self::from_histogram(
            SimParams {
                q: *params.q(),
                x: *params.x(),
                c: *params.c(),
            },
            n,
            seed,
            hist,
        )
    }

    fn from_histogram(params: SimParams, n: usize, seed: u64, hist: BTreeMap<u64, u64>) -> Self {
        // Exact integer moments, so merging order cannot change the result.
        let reps: u64 = hist.values().sum();
        let sum: u128 = hist.iter().map(|(c, f)| *c as u128 * *f as u128).sum();
        let sum_sq: u128 = hist.iter().map(|(c, f)| (*c as u128).pow(2) * *f as u128).sum();
        let (mean, stderr) = if reps == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let r = reps as f64;
            let mean = sum as f64 / r;
            let var = if reps > 1 {
                let centered = sum_sq as f64 - (sum as f64) * (sum as f64) / r;
                (centered / (r - 1.0)).max(0.0)
            } else {
                0.0
            };
            (mean, (var / r).sqrt())
        };
        Self {
            params,
            n,
            reps,
            seed,
            mean,
            stderr,
            histogram: hist.into_iter().map(|(count, freq)| HistogramBin { count, freq }).collect(),
        }
    }

    /// Combines summaries of disjoint replica ranges of the same run.
    pub fn merge(&self, other: &SimSummary) -> Result<SimSummary> {
        if self.n != other.n || self.seed != other.seed || self.params != other.params {
            return Err(domain("cannot merge summaries of different runs"));
        }
        let mut hist = BTreeMap::new();
        for b in self.histogram.iter().chain(&other.histogram) {
            *hist.entry(b.count).or_insert(0) += b.freq;
        }
        Ok(Self::from_histogram(self.params, self.n, self.seed, hist))
    }

    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("count,freq\n");
        for b in &self.histogram {
            out.push_str(&format!("{},{}\n", b.count, b.freq));
        }
        out
    }
}

/// `reps` independent replicas of length `n`.
pub fn convoy_mc(n: usize, params: &ModelParams<f64>, reps: u64, seed: u64) -> Result<SimSummary> {
    if reps == 0 {
        return Err(domain("reps must be at least 1"));
    }
    let counts = convoy_samples(n, params, seed, 0..reps)?;
    Ok(SimSummary::from_counts(params, n, seed, &counts))
}

fn step_prob<S: Scalar>(k: i64, s: i8, q: &S, c: &S) -> S {
    if k < 0 {
        return S::zero();
    }
    let qk = q.powi(k);
    match s {
        1 => c.clone(),
        0 => S::one() - c.clone() * (S::from_i64(2) - qk),
        -1 => c.clone() * (S::one() - qk),
        _ => S::zero(),
    }
}

/// Probability of following increments `signs` from level `k`; any path
/// that dips below zero has probability zero.
pub fn path_prob<S: Scalar>(k: i64, signs: &[i8], q: &S, c: &S) -> S {
    let mut level = k;
    let mut acc = S::one();
    for &s in signs {
        if level < 0 {
            return S::zero();
        }
        acc = acc * step_prob(level, s, q, c);
        level += s as i64;
        if level < 0 {
            return S::zero();
        }
    }
    acc
}

fn check_signs(signs: &[i8], max_len: usize) -> Result<()> {
    if signs.len() > max_len {
        return Err(domain(format!("sign sequences are limited to length {max_len}")));
    }
    if signs.iter().any(|s| !(-1..=1).contains(s)) {
        return Err(domain("signs must be -1, 0 or +1"));
    }
    Ok(())
}

/// `sum_k pi_k P(path from k with increments signs)`, truncated once the
/// remaining `pi` mass is below `tail_tol`.
pub fn path_weight(signs: &[i8], params: &ModelParams<f64>, tail_tol: f64) -> Result<f64> {
    check_signs(signs, 10)?;
    let law = initial_law(*params.q(), tail_tol)?;
    Ok(law
        .iter()
        .enumerate()
        .map(|(k, p)| p * path_prob(k as i64, signs, params.q(), params.c()))
        .sum())
}

/// Both sides of the path-reversal identity with the initial law replaced by
/// `q^k/(q;q)_k` (the common factor `(q;q)_inf` dropped) and the `k`-sum cut
/// at `kmax`. Because the identity holds term by term with `m = k + s`, the
/// two truncated sums agree exactly when the right side runs to `kmax + s`.
pub fn reversal_sides<S: Scalar>(signs: &[i8], q: &S, c: &S, kmax: usize) -> Result<(S, S)> {
    if q.is_zero() {
        return Err(domain("the reversal identity needs q > 0"));
    }
    let s: i64 = signs.iter().map(|&v| v as i64).sum();
    let reversed: Vec<i8> = signs.iter().rev().map(|&v| -v).collect();
    let weight = |k: i64| {
        let mut w = S::one();
        let mut qk = S::one();
        for _ in 0..k {
            qk = qk * q.clone();
            w = w * q.clone() / (S::one() - qk.clone());
        }
        w
    };
    let mut lhs = S::zero();
    for k in 0..=kmax as i64 {
        lhs = lhs + weight(k) * path_prob(k, signs, q, c);
    }
    let mut rhs = S::zero();
    for m in 0..=(kmax as i64 + s) {
        rhs = rhs + weight(m) * path_prob(m, &reversed, q, c);
    }
    Ok((lhs, q.powi(-s) * rhs))
}

/// `(lhs, q^{-s} rhs)` of the path-reversal identity under the initial law
/// `pi`, in floating point.
pub fn reversal_check(signs: &[i8], params: &ModelParams<f64>) -> Result<(f64, f64)> {
    check_signs(signs, 8)?;
    let q = *params.q();
    let law = initial_law(q, 1e-17)?;
    let kmax = law.len() - 1;
    let (l, r) = reversal_sides(signs, &q, params.c(), kmax)?;
    let scale = law[0];
    Ok((l * scale, r * scale))
}

/// Exact reversal check in rational arithmetic with the `k`-sum cut at `kmax`.
pub fn reversal_check_exact<S: Scalar>(signs: &[i8], params: &ModelParams<S>, kmax: usize) -> Result<(S, S)> {
    check_signs(signs, 8)?;
    reversal_sides(signs, params.q(), params.c(), kmax)
}

/// Chi-square comparison of the simulated queue law with the folded free walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LumpingResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Law of `|P_n + 1/2| - 1/2` for the lazy walk started at 0.
pub fn folded_walk_law(n: usize, c: f64) -> Vec<f64> {
    let mut p = vec![0.0; 2 * n + 1];
    p[n] = 1.0;
    for step in 0..n {
        let mut next = vec![0.0; 2 * n + 1];
        for idx in (n - step)..=(n + step) {
            let m = p[idx];
            if m == 0.0 {
                continue;
            }
            next[idx] += m * (1.0 - 2.0 * c);
            next[idx + 1] += m * c;
            next[idx - 1] += m * c;
        }
        p = next;
    }
    let mut folded = vec![0.0; n + 1];
    for (idx, m) in p.iter().enumerate() {
        let v = idx as i64 - n as i64;
        let f = if v >= 0 { v } else { -v - 1 } as usize;
        folded[f] += m;
    }
    folded
}

/// At `q = 0` the queue length after `n` steps from `Q_1 = 0` is distributed
/// as the folded walk; this tests that with a chi-square statistic.
pub fn lumping_check(n: usize, params: &ModelParams<f64>, samples: u64, seed: u64) -> Result<LumpingResult> {
    if *params.q() != 0.0 {
        return Err(domain("the lumping identity holds only at q = 0"));
    }
    if samples == 0 {
        return Err(domain("samples must be positive"));
    }
    let stepper = CoupledStepper::new(params);
    let levels: Vec<u64> = (0..samples)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r);
            let mut s = CoupledState::start(0);
            for _ in 0..n {
                stepper.step(&mut s, &mut rng);
            }
            s.queue
        })
        .collect();
    let law = folded_walk_law(n, *params.c());
    let mut observed = vec![0u64; law.len()];
    for l in levels {
        observed[l as usize] += 1;
    }
    // Pool bins from the right until every bin expects at least 5.
    let total = samples as f64;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut e_acc, mut o_acc) = (0.0, 0.0);
    for k in (0..law.len()).rev() {
        e_acc += law[k] * total;
        o_acc += observed[k] as f64;
        if e_acc >= 5.0 {
            bins.push((o_acc, e_acc));
            e_acc = 0.0;
            o_acc = 0.0;
        }
    }
    if let Some(last) = bins.last_mut() {
        last.0 += o_acc;
        last.1 += e_acc;
    } else {
        bins.push((o_acc, e_acc));
    }
    let statistic: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = bins.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64)
            .map_err(|e| Error::Internal(e.to_string()))?
            .sf(statistic)
    };
    Ok(LumpingResult { statistic, dof, p_value })
}

/// Crossing statistics of the TASEP coupling at `q = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingStats {
    pub samples: u64,
    /// Mean number of down-crossings `0 -> -1` of the mirrored walk.
    pub mean_down: f64,
    /// Mean number of up-crossings `-1 -> 0`.
    pub mean_up: f64,
    /// Mean local time at 0 before each step.
    pub mean_local_time: f64,
    /// Whether `D_n + E_n` equalled the convoy count in every sample.
    pub pathwise_match: bool,
    /// `(D_n + E_n) / sqrt(n)` per sample.
    pub scaled: Vec<f64>,
}

/// Runs the queue together with a mirrored walk `P~` (steps of `P~ <= -1`
/// have up and down exchanged) on the same stream, so that
/// `|P~ + 1/2| - 1/2` is the queue length pathwise and every convoy mark is a
/// crossing between 0 and -1.
pub fn tasep_crossing_stats(n: usize, x: f64, samples: u64, seed: u64) -> Result<CrossingStats> {
    let params = ModelParams::new(0.0, x)?;
    if samples == 0 || n == 0 {
        return Err(domain("n and samples must be positive"));
    }
    let stepper = CoupledStepper::new(&params);
    let c = *params.c();
    let per: Vec<(u64, u64, u64, bool)> = (0..samples)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r);
            let mut s = CoupledState::start(0);
            let mut walk: i64 = 0;
            let (mut down, mut up, mut local) = (0u64, 0u64, 0u64);
            for _ in 0..n {
                let rr: f64 = rng.random();
                let u: f64 = rng.random();
                if walk == 0 {
                    local += 1;
                }
                let raw = if rr < c {
                    1
                } else if rr < 1.0 - c {
                    0
                } else {
                    -1
                };
                let step = if walk <= -1 { -raw } else { raw };
                if walk == 0 && step == -1 {
                    down += 1;
                }
                if walk == -1 && step == 1 {
                    up += 1;
                }
                walk += step;
                stepper.step_with(&mut s, rr, u);
            }
            let folded = if walk >= 0 { walk } else { -walk - 1 } as u64;
            (down, up, local, down + up == s.convoy && folded == s.queue)
        })
        .collect();
    let m = samples as f64;
    Ok(CrossingStats {
        samples,
        mean_down: per.iter().map(|p| p.0 as f64).sum::<f64>() / m,
        mean_up: per.iter().map(|p| p.1 as f64).sum::<f64>() / m,
        mean_local_time: per.iter().map(|p| p.2 as f64).sum::<f64>() / m,
        pathwise_match: per.iter().all(|p| p.3),
        scaled: per.iter().map(|p| (p.0 + p.1) as f64 / (n as f64).sqrt()).collect(),
    })
}

/// Kolmogorov–Smirnov distance between the empirical law of `data` and
/// `|N(0, sigma2)|`.
pub fn ks_folded_normal(data: &[f64], sigma2: f64) -> Result<f64> {
    let normal = Normal::new(0.0, sigma2.sqrt()).map_err(|e| domain(e.to_string()))?;
    Ok(ks_distance(data, |y| if y <= 0.0 { 0.0 } else { 2.0 * normal.cdf(y) - 1.0 }))
}

/// Kolmogorov–Smirnov distance of `data` against a continuous CDF, exact for
/// data with ties.
pub fn ks_distance<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> f64 {
    let mut v: Vec<f64> = data.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j < v.len() && v[j] == v[i] {
            j += 1;
        }
        let f = cdf(v[i]);
        d = d.max((f - i as f64 / m).abs()).max((j as f64 / m - f).abs());
        i = j;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qseries::qpoch_infinite;
    use num_rational::BigRational;

    fn p(q: f64, x: f64) -> ModelParams<f64> {
        ModelParams::new(q, x).unwrap()
    }

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn pi_sampler() {
        let mut rng = replica_rng(1, 0);
        let s0 = PiSampler::new(0.0).unwrap();
        assert!((0..1000).all(|_| s0.sample(&mut rng) == 0));
        let s = PiSampler::new(0.5).unwrap();
        let draws: Vec<u64> = (0..100_000).map(|_| s.sample(&mut rng)).collect();
        let p0 = draws.iter().filter(|&&d| d == 0).count() as f64 / 1e5;
        let target = qpoch_infinite(0.5, 0.5, 1e-15).unwrap();
        let sd = (target * (1.0 - target) / 1e5).sqrt();
        assert!((p0 - target).abs() < 3.0 * sd, "{p0} vs {target}");
        let mean = draws.iter().sum::<u64>() as f64 / 1e5;
        let law = initial_law(0.5, 1e-16).unwrap();
        let exact_mean: f64 = law.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
        let var: f64 = law.iter().enumerate().map(|(k, v)| (k as f64 - exact_mean).powi(2) * v).sum();
        assert!((mean - exact_mean).abs() < 3.0 * (var / 1e5).sqrt());
        assert!(exact_mean < 0.5 / 0.25);
        assert!((s.mean() - exact_mean).abs() < 1e-12);
    }

    #[test]
    fn step_rules() {
        let st = CoupledStepper::new(&p(0.0, 0.5));
        let mut s = CoupledState::start(0);
        assert!(st.step_with(&mut s, 0.9, 0.999));
        assert_eq!((s.queue, s.walk, s.convoy), (0, -1, 1));
        let mut s = CoupledState::start(3);
        assert!(!st.step_with(&mut s, 0.9, 0.0));
        assert_eq!((s.queue, s.walk, s.convoy), (2, 2, 0));
        let mut s = CoupledState::start(3);
        st.step_with(&mut s, 0.1, 0.5);
        assert_eq!((s.queue, s.walk), (4, 4));
        st.step_with(&mut s, 0.5, 0.5);
        assert_eq!((s.queue, s.walk), (4, 4));
        let mut rng = replica_rng(9, 3);
        let pr = p(0.6, 0.3);
        let mut s = CoupledState::start(2);
        for _ in 0..10_000 {
            step_coupled(&mut s, &pr, &mut rng);
            assert!(s.coupling_holds());
        }
    }

    #[test]
    fn deterministic_and_mergeable() {
        let pr = p(0.5, 0.5);
        let a = convoy_mc(200, &pr, 500, 42).unwrap();
        let b = convoy_mc(200, &pr, 500, 42).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let left = SimSummary::from_counts(&pr, 200, 42, &convoy_samples(200, &pr, 42, 0..123).unwrap());
        let right = SimSummary::from_counts(&pr, 200, 42, &convoy_samples(200, &pr, 42, 123..500).unwrap());
        assert_eq!(left.merge(&right).unwrap(), a);
        assert_eq!(a.histogram.iter().map(|b| b.freq).sum::<u64>(), 500);
        assert!(convoy_mc(10, &pr, 0, 1).is_err());
    }

    #[test]
    fn small_n_mean_matches_exact() {
        let pr = p(0.5, 0.5);
        let s = convoy_mc(2, &pr, 1_000_000, 7).unwrap();
        assert!((s.mean - 31.0 / 128.0).abs() < 3.0 * s.stderr, "{} ± {}", s.mean, s.stderr);
    }

    #[test]
    fn path_weights() {
        let pr = p(0.5, 0.5);
        assert!((path_weight(&[], &pr, 1e-16).unwrap() - 1.0).abs() < 1e-13);
        assert!((path_weight(&[1], &pr, 1e-16).unwrap() - 0.25).abs() < 1e-13);
        assert!((path_weight(&[-1], &pr, 1e-16).unwrap() - 0.125).abs() < 1e-13);
        assert!(path_weight(&[1; 11], &pr, 1e-16).is_err());
    }

    #[test]
    fn reversal_small_cases() {
        let pr = p(0.5, 0.5);
        let (l, rr) = reversal_check(&[1], &pr).unwrap();
        assert!((l - 0.25).abs() < 1e-12 && (rr - 0.25).abs() < 1e-12);
        let (l, rr) = reversal_check(&[], &pr).unwrap();
        assert!((l - 1.0).abs() < 1e-12 && (rr - 1.0).abs() < 1e-12);
        // All-stay paths: s = 0, both sides are the same sum but not the total mass.
        let (l, rr) = reversal_check(&[0, 0, 0], &pr).unwrap();
        assert!((l - rr).abs() < 1e-12 && l < 1.0);
        let ex = ModelParams::new(r(1, 3), r(1, 4)).unwrap();
        let signs = [1, -1, 0, -1, 1, 1];
        let (l, rr) = reversal_check_exact(&signs, &ex, 30).unwrap();
        assert_eq!(l, rr);
        let (l, rr) = reversal_check(&signs, &p(1.0 / 3.0, 0.25)).unwrap();
        assert!((l - rr).abs() < 1e-10);
        assert!(reversal_check(&[1], &p(0.0, 0.5)).is_err());
    }

    #[test]
    fn lumping() {
        let res = lumping_check(1, &p(0.0, 0.5), 10_000, 3).unwrap();
        assert!(res.p_value > 0.001);
        for &x in &[0.5, 0.3] {
            let res = lumping_check(50, &p(0.0, x), 100_000, 11).unwrap();
            assert!(res.p_value > 0.001, "x={x}: {res:?}");
        }
        assert!(lumping_check(5, &p(0.5, 0.5), 10, 1).is_err());
        let law = folded_walk_law(30, 0.2);
        assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crossings() {
        let st = tasep_crossing_stats(1, 0.5, 100_000, 5).unwrap();
        assert!(st.pathwise_match);
        assert!((st.mean_down - 0.25).abs() < 4.0 * (0.25f64 * 0.75 / 1e5).sqrt());
        let st = tasep_crossing_stats(2000, 0.5, 4000, 6).unwrap();
        assert!(st.pathwise_match);
        assert!((st.mean_down / st.mean_local_time - 0.25).abs() < 0.01);
    }

    #[test]
    fn ks_distance_examples() {
        let data = [0.5, 0.5, 1.0];
        let d = ks_distance(&data, |y| y.clamp(0.0, 1.0));
        assert!((d - 0.5).abs() < 1e-15);
        assert!(ks_folded_normal(&[1.0], -1.0).is_err());
    }
}
