//! Expectation engines for the convoy size.
//!
//! Three independent routes to `E_x[Q_{n+1} - Q_1]`:
//!
//! * the moment recursion on `m[i][k] = E_x[q^{k Q_i}]` ([`expected_convoy_dp`]);
//! * the q-Genocchi formula ([`expected_convoy_genocchi`]);
//! * for `q = 0`, the terminating hypergeometric form ([`expected_convoy_tasep`]).
//!
//! All of them are generic over [`Scalar`], so exact rationals give
//! tolerance-free equalities.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::genocchi::{catalan, q_genocchi_cached};
use crate::quad::{integrate, QuadOptions};
use crate::qseries::qpoch_finite;
use crate::scalar::{binomial, Scalar};

/// Model parameters: asymmetry `q`, conditioned speed coordinate `x`, and the
/// derived `c = x(1-x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<S> {
    q: S,
    x: S,
    c: S,
}

impl<S: Scalar> ModelParams<S> {
    pub fn new(q: S, x: S) -> Result<Self> {
        if q < S::zero() || q >= S::one() {
            return Err(domain(format!("q must lie in [0,1), got {q:?}")));
        }
        if x <= S::zero() || x >= S::one() {
            return Err(domain(format!("x must lie in (0,1), got {x:?}")));
        }
        let c = x.clone() * (S::one() - x.clone());
        Ok(Self { q, x, c })
    }

    pub fn q(&self) -> &S {
        &self.q
    }

    pub fn x(&self) -> &S {
        &self.x
    }

    pub fn c(&self) -> &S {
        &self.c
    }

    pub fn to_numeric(&self) -> ModelParams<f64> {
        ModelParams {
            q: self.q.to_f64(),
            x: self.x.to_f64(),
            c: self.c.to_f64(),
        }
    }
}

/// `E_x[q^{k Q_1}] = (q;q)_k`.
pub fn moment_q1<S: Scalar>(k: usize, q: &S) -> S {
    qpoch_finite(q, q, k)
}

/// Triangular table `m[i][k] = E_x[q^{k Q_i}]`, `1 <= i <= n+1`,
/// `1 <= k <= n+2-i`.
#[derive(Debug, Clone)]
pub struct MomentTable<S> {
    n: usize,
    rows: Vec<Vec<S>>,
    errors: Option<Vec<Vec<f64>>>,
}

impl<S: Scalar> MomentTable<S> {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `m[i][k]` with the 1-based indices used in the recursion.
    pub fn get(&self, i: usize, k: usize) -> Option<&S> {
        self.rows.get(i.checked_sub(1)?)?.get(k.checked_sub(1)?)
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.rows[i - 1]
    }

    /// First-order roundoff bound on `m[i][k]`; zero in exact mode.
    pub fn error_bound(&self, i: usize, k: usize) -> f64 {
        match &self.errors {
            Some(e) => e[i - 1][k - 1],
            None => 0.0,
        }
    }
}

/// Absolute accuracy demanded from the floating moment recursion before
/// [`expected_convoy_dp`] refuses to answer.
pub const NUMERIC_DP_TOL: f64 = 1e-9;

/// Fills the moment table by
/// `m[i+1][k] = (1 + c a_k) m[i][k] + c b_k m[i][k+1]` with
/// `a_k = (1-q^k)^2 / q^k` and `b_k = -(1-q^k)/q^k`.
///
/// In floating mode a first-order roundoff bound is propagated alongside the
/// values: the `q^{-k}` coefficients amplify errors roughly like
/// `q^{-n^2/2}`, so small `q` and large `n` quickly exhaust double precision.
pub fn build_moment_table<S: Scalar>(n: usize, params: &ModelParams<S>) -> Result<MomentTable<S>> {
    let q = params.q();
    if q.is_zero() {
        return Err(domain(
            "the moment recursion is singular at q = 0; use expected_convoy_tasep",
        ));
    }
    if n == 0 {
        return Err(domain("n must be positive"));
    }
    let c = params.c().clone();
    let width = n + 1;
    let mut qk = Vec::with_capacity(width + 1);
    let mut p = S::one();
    for _ in 0..=width {
        qk.push(p.clone());
        p = p * q.clone();
    }
    let mut first = Vec::with_capacity(width);
    let mut acc = S::one();
    for k in 1..=width {
        acc = acc * (S::one() - qk[k].clone());
        first.push(acc.clone());
    }
    let track = !S::is_exact();
    let eps = f64::EPSILON;
    let mut errs: Vec<Vec<f64>> = Vec::new();
    if track {
        errs.push((1..=width).map(|k| eps * k as f64).collect());
    }
    let mut rows = vec![first];
    for i in 1..=n {
        let prev = &rows[i - 1];
        let len = width - i;
        let mut next = Vec::with_capacity(len);
        let mut next_err = Vec::with_capacity(if track { len } else { 0 });
        for k in 1..=len {
            let one_minus = S::one() - qk[k].clone();
            let a = c.clone() * one_minus.clone() * one_minus.clone() / qk[k].clone();
            let b = -(c.clone() * one_minus / qk[k].clone());
            let stay = S::one() + a;
            let v = stay.clone() * prev[k - 1].clone() + b.clone() * prev[k].clone();
            if track {
                let e = &errs[i - 1];
                let (sf, bf) = (stay.to_f64().abs(), b.to_f64().abs());
                let rounding = 4.0 * eps * (sf * prev[k - 1].to_f64().abs() + bf * prev[k].to_f64().abs());
                next_err.push(sf * e[k - 1] + bf * e[k] + rounding);
            }
            next.push(v);
        }
        rows.push(next);
        if track {
            errs.push(next_err);
        }
    }
    Ok(MomentTable {
        n,
        rows,
        errors: track.then_some(errs),
    })
}

/// `E_x[Q_{n+1} - Q_1] = c sum_{i=1}^n m[i][1]`.
pub fn expected_convoy_dp<S: Scalar>(n: usize, params: &ModelParams<S>) -> Result<S> {
    let table = build_moment_table(n, params)?;
    let bound: f64 = params.c().to_f64() * (1..=n).map(|i| table.error_bound(i, 1)).sum::<f64>();
    if bound > NUMERIC_DP_TOL {
        return Err(Error::Numeric {
            message: format!("floating moment recursion is unreliable at n={n}; use exact mode"),
            achieved: bound,
        });
    }
    Ok(expected_from_table(&table, params, n))
}

/// Reads `E_x[Q_{m+1} - Q_1]` for any `m <= table.n()` off a built table.
pub fn expected_from_table<S: Scalar>(table: &MomentTable<S>, params: &ModelParams<S>, m: usize) -> S {
    let mut acc = S::zero();
    for i in 1..=m {
        acc = acc + table.get(i, 1).expect("index within table").clone();
    }
    params.c().clone() * acc
}

fn genocchi_values<S: Scalar>(n: usize, q: &S) -> Result<Vec<S>> {
    if q.is_zero() {
        // B_k(1,0) is the Catalan number.
        return Ok((0..=n as u64).map(|k| S::from_bigint(&catalan(k))).collect());
    }
    Ok(q_genocchi_cached(n)?.iter().map(|b| b.eval(q)).collect())
}

/// `sum_{k=0}^{n-1} (-1)^k (1-q)^{2k+1} c^{k+1} binom(n, k+1) B_k(1,q)`.
pub fn expected_convoy_genocchi<S: Scalar>(n: usize, params: &ModelParams<S>) -> Result<S> {
    if n == 0 {
        return Err(domain("n must be positive"));
    }
    let q = params.q();
    let c = params.c().clone();
    let b = genocchi_values(n - 1, q)?;
    let one_minus_sq = (S::one() - q.clone()) * (S::one() - q.clone());
    let mut lead = (S::one() - q.clone()) * c.clone();
    let mut acc = S::zero();
    for (k, bk) in b.iter().enumerate() {
        let term = lead.clone() * S::from_bigint(&binomial(n as u64, k as u64 + 1)) * bk.clone();
        acc = if k % 2 == 0 { acc + term } else { acc - term };
        lead = lead * one_minus_sq.clone() * c.clone();
    }
    Ok(acc)
}

/// `E_x[q^{Q_{n+1}}] = sum_{k=0}^n (1-q)^{2k+1} (-c)^k binom(n,k) B_k(1,q)`.
#[allow(non_snake_case)]
pub fn moment_qQn_closed<S: Scalar>(n: usize, params: &ModelParams<S>) -> Result<S> {
    let q = params.q();
    let b = genocchi_values(n, q)?;
    let one_minus_sq = (S::one() - q.clone()) * (S::one() - q.clone());
    let minus_c = -params.c().clone();
    let mut lead = S::one() - q.clone();
    let mut acc = S::zero();
    for (k, bk) in b.iter().enumerate() {
        acc = acc + lead.clone() * S::from_bigint(&binomial(n as u64, k as u64)) * bk.clone();
        lead = lead * one_minus_sq.clone() * minus_c.clone();
    }
    Ok(acc)
}

/// Terminating `2F1(a, b; d; z)` for `a in {0, -1, -2, ...}`.
pub fn hyp2f1_terminating<S: Scalar>(a: i64, b: &S, d: &S, z: &S) -> Result<S> {
    if a > 0 {
        return Err(domain(format!("terminating 2F1 needs a <= 0, got {a}")));
    }
    if let Some(di) = d.as_integer() {
        if di <= 0 {
            return Err(domain(format!("2F1 lower parameter {di} is a nonpositive integer")));
        }
    }
    let mut term = S::one();
    let mut acc = S::one();
    for k in 0..(-a) {
        let kk = S::from_i64(k);
        term = term * (S::from_i64(a) + kk.clone()) * (b.clone() + kk.clone()) * z.clone()
            / ((d.clone() + kk.clone()) * (kk + S::one()));
        acc = acc + term.clone();
    }
    Ok(acc)
}

/// `E_x[Q_{n+1} - Q_1]` at `q = 0`: `(2F1(-n, -1/2; 1; 4c) - 1) / 2`.
///
/// Exact scalars sum the series; floating scalars use the three-term
/// recurrence in `n`, which stays accurate where the alternating series
/// cancels catastrophically.
pub fn expected_convoy_tasep<S: Scalar>(n: usize, x: &S) -> Result<S> {
    if n == 0 {
        return Err(domain("n must be positive"));
    }
    if *x <= S::zero() || *x >= S::one() {
        return Err(domain(format!("x must lie in (0,1), got {x:?}")));
    }
    let z = S::from_i64(4) * x.clone() * (S::one() - x.clone());
    let half = S::from_ratio(1, 2);
    let f = if S::is_exact() {
        hyp2f1_terminating(-(n as i64), &(-half.clone()), &S::one(), &z)?
    } else {
        tasep_2f1_recurrence(n, &z)
    };
    Ok(half * (f - S::one()))
}

/// `F_n = 2F1(-n, -1/2; 1; z)` via
/// `(n+1) F_{n+1} = (2n+1 - (n-1/2) z) F_n + n (z-1) F_{n-1}`.
pub fn tasep_2f1_recurrence<S: Scalar>(n: usize, z: &S) -> S {
    let mut prev = S::one();
    let mut cur = S::one() + z.clone() / S::from_i64(2);
    if n == 0 {
        return prev;
    }
    for m in 1..n {
        let mf = S::from_i64(m as i64);
        let next = ((S::from_i64(2 * m as i64 + 1) - (mf.clone() - S::from_ratio(1, 2)) * z.clone())
            * cur.clone()
            + mf.clone() * (z.clone() - S::one()) * prev)
            / (mf + S::one());
        prev = cur;
        cur = next;
    }
    cur
}

/// `sqrt(4 c n / pi)`.
pub fn asymptotic_expected(n: usize, x: f64) -> f64 {
    (4.0 * x * (1.0 - x) * n as f64 / std::f64::consts::PI).sqrt()
}

/// `sqrt(pi) / 4`, the `x`-averaged constant.
pub fn universal_constant() -> f64 {
    std::f64::consts::PI.sqrt() / 4.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvoyMethod {
    Dp,
    Genocchi,
    Tasep,
}

impl ConvoyMethod {
    pub fn name(self) -> &'static str {
        match self {
            ConvoyMethod::Dp => "dp",
            ConvoyMethod::Genocchi => "genocchi",
            ConvoyMethod::Tasep => "tasep",
        }
    }
}

impl std::str::FromStr for ConvoyMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dp" => Ok(Self::Dp),
            "genocchi" => Ok(Self::Genocchi),
            "tasep" => Ok(Self::Tasep),
            _ => Err(domain(format!("unknown method {s:?} (dp, genocchi, tasep)"))),
        }
    }
}

/// Expected convoy size with a chosen engine.
pub fn expected_convoy<S: Scalar>(n: usize, params: &ModelParams<S>, method: ConvoyMethod) -> Result<S> {
    match method {
        ConvoyMethod::Dp => expected_convoy_dp(n, params),
        ConvoyMethod::Genocchi => expected_convoy_genocchi(n, params),
        ConvoyMethod::Tasep => {
            if !params.q().is_zero() {
                return Err(domain("the TASEP closed form needs q = 0"));
            }
            expected_convoy_tasep(n, params.x())
        }
    }
}

/// `int_0^1 E_x[Q_{n+1} - Q_1] dx` by adaptive quadrature over a floating engine.
pub fn unconditional_expected(n: usize, q: f64, method: ConvoyMethod, tol: f64) -> Result<f64> {
    let mut failure = None;
    let f = |x: f64| {
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        match ModelParams::new(q, x).and_then(|p| expected_convoy(n, &p, method)) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let r = integrate(f, 0.0, 1.0, QuadOptions::abs(tol));
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(r?.value)
}

/// One CSV row of an expectation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvoyRecord {
    pub n: usize,
    pub q: String,
    pub x: String,
    pub method: String,
    pub value: String,
    pub mode: String,
}

impl ConvoyRecord {
    pub const HEADER: &'static str = "n,q,x,method,value,mode";

    pub fn to_csv(&self) -> String {
        format!("{},{},{},{},{},{}", self.n, self.q, self.x, self.method, self.value, self.mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn exact(q: BigRational, x: BigRational) -> ModelParams<BigRational> {
        ModelParams::new(q, x).unwrap()
    }

    #[test]
    fn params_validate() {
        assert!(ModelParams::new(1.0, 0.5).is_err());
        assert!(ModelParams::new(0.5, 0.0).is_err());
        assert!(ModelParams::new(-0.1, 0.5).is_err());
        assert_eq!(*ModelParams::new(0.0, 0.5).unwrap().c(), 0.25);
    }

    #[test]
    fn q1_moments() {
        assert_eq!(moment_q1(1, &r(1, 2)), r(1, 2));
        assert_eq!(moment_q1(2, &r(1, 2)), r(3, 8));
        assert_eq!(moment_q1(3, &r(0, 1)), r(1, 1));
    }

    #[test]
    fn table_hand_values() {
        let p = exact(r(1, 2), r(1, 2));
        let t = build_moment_table(2, &p).unwrap();
        // 0.5 - 0.125 c with c = 1/4.
        assert_eq!(t.get(2, 1).unwrap(), &(r(1, 2) - r(1, 8) * r(1, 4)));
        for k in 1..=3 {
            assert_eq!(t.get(1, k).unwrap(), &moment_q1(k, &r(1, 2)));
        }
        assert!(build_moment_table(2, &exact(r(0, 1), r(1, 2))).is_err());
    }

    #[test]
    fn exact_table_entries_in_unit_interval_and_decreasing() {
        let p = exact(r(1, 3), r(1, 2));
        let t = build_moment_table(10, &p).unwrap();
        for i in 1..=11 {
            let row = t.row(i);
            for (k, v) in row.iter().enumerate() {
                assert!(*v > r(0, 1) && *v <= r(1, 1), "m[{i}][{}]", k + 1);
                if k > 0 {
                    assert!(*v < row[k - 1]);
                }
            }
        }
    }

    #[test]
    fn small_n_values() {
        let p = exact(r(1, 2), r(1, 2));
        assert_eq!(expected_convoy_dp(1, &p).unwrap(), r(1, 8));
        assert_eq!(expected_convoy_dp(2, &p).unwrap(), r(31, 128));
        assert_eq!(expected_convoy_genocchi(2, &p).unwrap(), r(31, 128));
        assert_eq!(expected_convoy_genocchi(1, &p).unwrap(), r(1, 8));
        let p0 = exact(r(0, 1), r(1, 3));
        let c = r(2, 9);
        assert_eq!(
            expected_convoy_genocchi(2, &p0).unwrap(),
            r(2, 1) * c.clone() - c.clone() * c.clone()
        );
        assert_eq!(expected_convoy_tasep(1, &r(1, 3)).unwrap(), c.clone());
        assert_eq!(expected_convoy_tasep(2, &r(1, 3)).unwrap(), r(2, 1) * c.clone() - c.clone() * c);
    }

    #[test]
    fn closed_moment_matches_table() {
        let p = exact(r(1, 2), r(1, 3));
        let t = build_moment_table(12, &p).unwrap();
        for n in 0..=12 {
            assert_eq!(&moment_qQn_closed(n, &p).unwrap(), t.get(n + 1, 1).unwrap(), "n={n}");
        }
        assert_eq!(moment_qQn_closed(0, &p).unwrap(), r(1, 2));
    }

    #[test]
    fn hypergeometric_examples() {
        assert_eq!(hyp2f1_terminating(0, &r(3, 7), &r(1, 1), &r(5, 1)).unwrap(), r(1, 1));
        let c = r(1, 5);
        let z = r(4, 1) * c.clone();
        assert_eq!(
            hyp2f1_terminating(-1, &r(-1, 2), &r(1, 1), &z).unwrap(),
            r(1, 1) + r(2, 1) * c
        );
        assert_eq!(hyp2f1_terminating(-2, &r(-1, 2), &r(1, 1), &r(1, 1)).unwrap(), r(15, 8));
        assert!(hyp2f1_terminating(-2, &r(1, 2), &r(-1, 1), &r(1, 1)).is_err());
    }

    #[test]
    fn recurrence_matches_exact_series() {
        for n in [1usize, 2, 5, 40, 150] {
            let x = r(3, 10);
            let e = expected_convoy_tasep(n, &x).unwrap().to_f64();
            let f = expected_convoy_tasep(n, &0.3f64).unwrap();
            assert!((e - f).abs() <= 1e-12 * e.abs().max(1.0), "n={n}: {e} vs {f}");
        }
    }

    #[test]
    fn tasep_asymptotics() {
        let n = 10_000;
        let e = expected_convoy_tasep(n, &0.5f64).unwrap();
        assert!((e / (n as f64).sqrt() - 1.0 / std::f64::consts::PI.sqrt()).abs() < 0.02);
        assert!((asymptotic_expected(1, 0.5) - 0.564_189_583_5).abs() < 1e-9);
        assert!((universal_constant() - 0.443_113_462_7).abs() < 1e-9);
        assert!(asymptotic_expected(10, 1e-12) < 1e-5);
    }

    #[test]
    fn numeric_dp_agrees_and_guards() {
        let pe = exact(r(1, 2), r(1, 2));
        let pf = ModelParams::new(0.5, 0.5).unwrap();
        let e = expected_convoy_dp(8, &pe).unwrap().to_f64();
        let f = expected_convoy_dp(8, &pf).unwrap();
        assert!((e - f).abs() < 1e-8, "{e} vs {f}");
        assert!(matches!(expected_convoy_dp(40, &pf), Err(Error::Numeric { .. })));
    }

    #[test]
    fn monotone_in_n() {
        let p = exact(r(4, 5), r(1, 4));
        let t = build_moment_table(15, &p).unwrap();
        let mut last = r(0, 1);
        for m in 1..=15 {
            let v = expected_from_table(&t, &p, m);
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn unconditional_values() {
        let v = unconditional_expected(1, 0.0, ConvoyMethod::Tasep, 1e-12).unwrap();
        assert!((v - 1.0 / 6.0).abs() < 1e-12);
        let v = unconditional_expected(1, 0.4, ConvoyMethod::Dp, 1e-12).unwrap();
        assert!((v - 0.6 / 6.0).abs() < 1e-12);
        let v = unconditional_expected(1, 0.4, ConvoyMethod::Genocchi, 1e-12).unwrap();
        assert!((v - 0.6 / 6.0).abs() < 1e-12);
        let n = 4000;
        let v = unconditional_expected(n, 0.0, ConvoyMethod::Tasep, 1e-8).unwrap();
        let target = universal_constant() * (n as f64).sqrt();
        assert!((v / target - 1.0).abs() < 0.05, "{v} vs {target}");
    }
}
