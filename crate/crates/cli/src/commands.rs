use std::fmt;
use std::process::ExitCode;

use anyhow::Result;
use convoy_core::genocchi::{catalan, enumerate_pistols, pistol_sinv_polynomial, q_genocchi, q_genocchi_cached, sinv};
use convoy_core::kmtrans::{km_transition, BirthDeathSpec, TruncatedChain};
use convoy_core::moments::{expected_convoy, ConvoyMethod, ConvoyRecord};
use convoy_core::qhermite::h_eval;
use convoy_core::qseries::qpoch_infinite;
use convoy_core::quad::QuadResult;
use convoy_core::queuesim::{convoy_mc as run_mc, convoy_samples, ks_folded_normal, reversal_check_exact, SimSummary};
use convoy_core::scalar::parse_rational;
use convoy_core::weaklimit::{
    complex_gamma, density_x, expected_gap, hyp1f1, hyp1f1_series, j_kernel, DensityGrid, JointDensity, YMarginal,
};
use convoy_core::{asepsim, BigInt, BigRational, LaurentPoly, ModelParams};
use num_bigint::Sign;
use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{emit, json, num, Format, Table};
use crate::{AsepArgs, Common, DensityKind, ExactArgs, KmArgs, McArgs, MethodArg, UniArgs, WeakArgs};

/// A malformed or inconsistent command line.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// 2 for usage and domain errors, 3 for numerical or budget failures.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match e.downcast_ref::<convoy_core::Error>() {
        Some(convoy_core::Error::Domain(_) | convoy_core::Error::Precondition(_)) => 2,
        Some(_) => 3,
        None => 1,
    }
}

fn write(common: &Common, text: &str) -> Result<()> {
    emit(common.out.as_deref(), text)
}

#[derive(Serialize)]
struct GenocchiRow {
    n: usize,
    poly: String,
    coefficients: Vec<String>,
}

pub fn genocchi(n: usize, common: &Common) -> Result<ExitCode> {
    if n > 40 {
        return Err(convoy_core::Error::Resource(format!("n = {n} exceeds the limit of 40")).into());
    }
    let seq = q_genocchi_cached(n)?;
    let mut rows = Vec::with_capacity(seq.len());
    for (k, b) in seq.iter().enumerate() {
        let coefficients = b.to_dense()?.iter().map(BigInt::to_string).collect();
        rows.push(GenocchiRow {
            n: k,
            poly: b.to_string(),
            coefficients,
        });
    }
    let text = match common.format {
        Format::Csv => rows.iter().map(|r| r.coefficients.join(",") + "\n").collect(),
        Format::Json => json(&rows)?,
    };
    write(common, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn methods(arg: MethodArg, q_is_zero: bool) -> Vec<ConvoyMethod> {
    match arg {
        MethodArg::Dp => vec![ConvoyMethod::Dp],
        MethodArg::Genocchi => vec![ConvoyMethod::Genocchi],
        MethodArg::Tasep => vec![ConvoyMethod::Tasep],
        // The moment recursion needs q > 0; at q = 0 the closed form stands in.
        MethodArg::Both if q_is_zero => vec![ConvoyMethod::Genocchi, ConvoyMethod::Tasep],
        MethodArg::Both => vec![ConvoyMethod::Dp, ConvoyMethod::Genocchi],
    }
}

#[derive(Serialize)]
struct ExactOutput {
    records: Vec<ConvoyRecord>,
    agreement: Option<&'static str>,
}

fn rational_text(r: &BigRational) -> String {
    r.to_string()
}

pub fn convoy_exact(a: &ExactArgs, common: &Common) -> Result<ExitCode> {
    let exact = a.exact || a.q.contains('/') || a.x.contains('/');
    let mut records = Vec::new();
    let agree = if exact {
        let q = parse_rational(&a.q).map_err(|e| usage(e.to_string()))?;
        let x = parse_rational(&a.x).map_err(|e| usage(e.to_string()))?;
        let p = ModelParams::new(q.clone(), x.clone())?;
        let mut values = Vec::new();
        for m in methods(a.method, q.numer().sign() == Sign::NoSign) {
            let v: Ratio<BigInt> = expected_convoy(a.n, &p, m)?;
            records.push(ConvoyRecord {
                n: a.n,
                q: rational_text(&q),
                x: rational_text(&x),
                method: m.name().into(),
                value: rational_text(&v),
                mode: "exact".into(),
            });
            values.push(v);
        }
        values.windows(2).all(|w| w[0] == w[1])
    } else {
        let q: f64 = a.q.parse().map_err(|_| usage(format!("bad --q {:?}", a.q)))?;
        let x: f64 = a.x.parse().map_err(|_| usage(format!("bad --x {:?}", a.x)))?;
        let p = ModelParams::new(q, x)?;
        let mut values = Vec::new();
        for m in methods(a.method, q == 0.0) {
            let v: f64 = expected_convoy(a.n, &p, m)?;
            records.push(ConvoyRecord {
                n: a.n,
                q: num(q),
                x: num(x),
                method: m.name().into(),
                value: num(v),
                mode: "float".into(),
            });
            values.push(v);
        }
        values
            .windows(2)
            .all(|w| (w[0] - w[1]).abs() <= a.tol * w[0].abs().max(1.0))
    };
    let agreement = (records.len() > 1).then_some(if agree { "MATCH" } else { "MISMATCH" });
    let text = match common.format {
        Format::Csv => {
            let mut s = String::from(ConvoyRecord::HEADER);
            s.push('\n');
            for r in &records {
                s.push_str(&r.to_csv());
                s.push('\n');
            }
            if let Some(tag) = agreement {
                s.push_str(tag);
                s.push('\n');
            }
            s
        }
        Format::Json => json(&ExactOutput { records, agreement })?,
    };
    write(common, &text)?;
    if agree {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: engines disagree");
        Ok(ExitCode::from(3))
    }
}

pub fn convoy_mc(a: &McArgs, common: &Common) -> Result<ExitCode> {
    let p = ModelParams::new(a.q, a.x)?;
    let s = run_mc(a.n, &p, a.reps, a.seed)?;
    let text = match common.format {
        Format::Csv => {
            let mut t = Table::new(&["q", "x", "c", "n", "reps", "seed", "mean", "stderr"]);
            t.push(vec![
                num(s.params.q),
                num(s.params.x),
                num(s.params.c),
                s.n.to_string(),
                s.reps.to_string(),
                s.seed.to_string(),
                num(s.mean),
                num(s.stderr),
            ]);
            format!("{}\n{}", t.render(), s.histogram_csv())
        }
        Format::Json => json(&s)?,
    };
    write(common, &text)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct KmRow {
    i: usize,
    j: usize,
    n: usize,
    km: f64,
    matrix: f64,
    abs_diff: f64,
}

#[derive(Serialize)]
struct KmOutput {
    q: f64,
    x: f64,
    imax: usize,
    n: usize,
    tol: f64,
    max_abs_diff: f64,
    rows: Vec<KmRow>,
}

pub fn km_verify(a: &KmArgs, common: &Common) -> Result<ExitCode> {
    if !(a.tol > 0.0) {
        return Err(usage("--tol must be positive"));
    }
    let p = ModelParams::new(a.q, a.x)?;
    let chain = TruncatedChain::new(BirthDeathSpec::new(&p), a.imax + a.n + 1);
    let quad_tol = a.tol * 1e-2;
    let per_start: Vec<Vec<KmRow>> = (0..=a.imax)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            let mut row = vec![0.0; chain.cap() + 1];
            row[i] = 1.0;
            for n in 0..=a.n {
                if n > 0 {
                    row = chain.step(&row);
                }
                for (j, &matrix) in row.iter().enumerate().take(a.imax + 1) {
                    let km = km_transition(i, j, n, &p, quad_tol)?;
                    out.push(KmRow {
                        i,
                        j,
                        n,
                        km,
                        matrix,
                        abs_diff: (km - matrix).abs(),
                    });
                }
            }
            Ok(out)
        })
        .collect::<convoy_core::Result<_>>()?;
    let rows: Vec<KmRow> = per_start.into_iter().flatten().collect();
    let max_abs_diff = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
    let text = match common.format {
        Format::Csv => {
            let mut t = Table::new(&["i", "j", "n", "km", "matrix", "abs_diff"]);
            for r in &rows {
                t.push(vec![
                    r.i.to_string(),
                    r.j.to_string(),
                    r.n.to_string(),
                    num(r.km),
                    num(r.matrix),
                    num(r.abs_diff),
                ]);
            }
            t.render()
        }
        Format::Json => json(&KmOutput {
            q: a.q,
            x: a.x,
            imax: a.imax,
            n: a.n,
            tol: a.tol,
            max_abs_diff,
            rows,
        })?,
    };
    write(common, &text)?;
    if max_abs_diff > a.tol {
        eprintln!("error: max |km - matrix| = {max_abs_diff:e} exceeds {:e}", a.tol);
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct UniRow {
    q: f64,
    x: f64,
    n: usize,
    reps: u64,
    seed: u64,
    mean: f64,
    stderr: f64,
    target: f64,
    in_band: bool,
    ks: f64,
}

pub fn universality(a: &UniArgs, common: &Common) -> Result<ExitCode> {
    if a.q.is_empty() {
        return Err(usage("--q needs at least one value"));
    }
    let s = (a.n as f64).sqrt();
    let mut rows = Vec::new();
    for (k, &q) in a.q.iter().enumerate() {
        let p = ModelParams::new(q, a.x)?;
        // Independent streams per q.
        let seed = a.seed + k as u64;
        let counts = convoy_samples(a.n, &p, seed, 0..a.reps)?;
        let summary = SimSummary::from_counts(&p, a.n, seed, &counts);
        let scaled: Vec<f64> = counts.iter().map(|&c| c as f64 / s).collect();
        let c = *p.c();
        let target = (4.0 * c / std::f64::consts::PI).sqrt();
        let mean = summary.mean / s;
        rows.push(UniRow {
            q,
            x: a.x,
            n: a.n,
            reps: a.reps,
            seed,
            mean,
            stderr: summary.stderr / s,
            target,
            in_band: (mean - target).abs() <= 0.05 * target,
            ks: ks_folded_normal(&scaled, 2.0 * c)?,
        });
    }
    let text = match common.format {
        Format::Csv => {
            let mut t = Table::new(&["q", "x", "n", "reps", "seed", "mean", "stderr", "target", "in_band", "ks"]);
            for r in &rows {
                t.push(vec![
                    num(r.q),
                    num(r.x),
                    r.n.to_string(),
                    r.reps.to_string(),
                    r.seed.to_string(),
                    num(r.mean),
                    num(r.stderr),
                    num(r.target),
                    r.in_band.to_string(),
                    num(r.ks),
                ]);
            }
            t.render()
        }
        Format::Json => json(&rows)?,
    };
    write(common, &text)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct GridOutput<'a> {
    gamma: f64,
    c: f64,
    density: &'static str,
    at: Option<f64>,
    grid: &'a DensityGrid,
}

#[derive(Serialize)]
struct GapOutput {
    gamma: f64,
    c: f64,
    expected_gap: f64,
    err: f64,
}

pub fn weak_limit(a: &WeakArgs, common: &Common) -> Result<ExitCode> {
    let c = a.x * (1.0 - a.x);
    if !(a.x > 0.0 && a.x < 1.0) {
        return Err(usage("--x must lie in (0,1)"));
    }
    if a.density == DensityKind::Gap {
        let g = expected_gap(a.gamma, c, a.tol)?;
        let out = GapOutput {
            gamma: a.gamma,
            c,
            expected_gap: g.value,
            err: g.error,
        };
        let text = match common.format {
            Format::Csv => {
                let mut t = Table::new(&["gamma", "c", "expected_gap", "err"]);
                t.push(vec![num(out.gamma), num(out.c), num(out.expected_gap), num(out.err)]);
                t.render()
            }
            Format::Json => json(&out)?,
        };
        write(common, &text)?;
        return Ok(ExitCode::SUCCESS);
    }
    if !(a.lo < a.hi) || a.points < 2 {
        return Err(usage("need --lo < --hi and --points >= 2"));
    }
    let points = DensityGrid::linspace(a.lo, a.hi, a.points);
    let shift = a.gamma.ln() / a.gamma;
    let reach = (a.lo + shift).abs().max((a.hi + shift).abs());
    let (name, at, grid) = match a.density {
        DensityKind::X => {
            let g = DensityGrid::evaluate(points, |x| {
                Ok(QuadResult {
                    value: density_x(x, a.gamma),
                    error: 0.0,
                    intervals: 0,
                })
            })?;
            ("x", None, g)
        }
        DensityKind::Y => {
            let ym = YMarginal::new(a.gamma, c, reach, a.tol)?;
            ("y", None, DensityGrid::evaluate(points, |y| ym.at(y))?)
        }
        DensityKind::Joint => {
            let row = JointDensity::new(a.gamma, c, a.tol)?.row(a.at, reach)?;
            ("joint", Some(a.at), DensityGrid::evaluate(points, |y| row.at(y))?)
        }
        DensityKind::Gap => unreachable!("handled above"),
    };
    let text = match common.format {
        Format::Csv => grid.to_csv(),
        Format::Json => json(&GridOutput {
            gamma: a.gamma,
            c,
            density: name,
            at,
            grid: &grid,
        })?,
    };
    write(common, &text)?;
    Ok(ExitCode::SUCCESS)
}

pub fn asep_demo(a: &AsepArgs, common: &Common) -> Result<ExitCode> {
    let s = asepsim::second_class_speed(a.n, a.horizon, a.q, a.reps, a.seed)?;
    let text = match common.format {
        Format::Csv => s.to_csv(),
        Format::Json => json(&s)?,
    };
    write(common, &text)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct CheckRow {
    check: &'static str,
    passed: bool,
    detail: String,
}

fn r(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn self_checks() -> Vec<(&'static str, Box<dyn Fn() -> convoy_core::Result<String>>)> {
    vec![
        (
            "q-Genocchi B_1..B_4",
            Box::new(|| {
                let want = ["1", "2 + 1*q", "5 + 7*q + 4*q^2 + 1*q^3", "14 + 36*q + 45*q^2 + 35*q^3 + 18*q^4 + 6*q^5 + 1*q^6"];
                for (k, w) in want.iter().enumerate() {
                    let w: LaurentPoly = w.parse()?;
                    if q_genocchi(k + 1)? != w {
                        return Err(convoy_core::Error::Internal(format!("B_{} differs", k + 1)));
                    }
                }
                Ok("exact".into())
            }),
        ),
        (
            "pistol sums and Catalan counts",
            Box::new(|| {
                for n in 1..=4 {
                    let zero = enumerate_pistols(n)?.filter(|p| sinv(p) == 0).count();
                    if pistol_sinv_polynomial(n)? != q_genocchi(n)? || BigInt::from(zero) != catalan(n as u64) {
                        return Err(convoy_core::Error::Internal(format!("n = {n}")));
                    }
                }
                Ok("n <= 4".into())
            }),
        ),
        (
            "moment recursion = q-Genocchi formula",
            Box::new(|| {
                let p = ModelParams::new(r(1, 2), r(1, 3))?;
                for n in 1..=8 {
                    let a: BigRational = expected_convoy(n, &p, ConvoyMethod::Dp)?;
                    let b: BigRational = expected_convoy(n, &p, ConvoyMethod::Genocchi)?;
                    if a != b {
                        return Err(convoy_core::Error::Internal(format!("n = {n}")));
                    }
                }
                let p = ModelParams::new(r(1, 2), r(1, 2))?;
                let v: BigRational = expected_convoy(2, &p, ConvoyMethod::Dp)?;
                if v != r(31, 128) {
                    return Err(convoy_core::Error::Internal(format!("n = 2 gave {v}")));
                }
                Ok("n <= 8 exact".into())
            }),
        ),
        (
            "TASEP closed form = q-Genocchi formula at q = 0",
            Box::new(|| {
                let p = ModelParams::new(r(0, 1), r(2, 5))?;
                for n in 1..=30 {
                    let a: BigRational = expected_convoy(n, &p, ConvoyMethod::Tasep)?;
                    let b: BigRational = expected_convoy(n, &p, ConvoyMethod::Genocchi)?;
                    if a != b {
                        return Err(convoy_core::Error::Internal(format!("n = {n}")));
                    }
                }
                Ok("n <= 30 exact".into())
            }),
        ),
        (
            "path reversal",
            Box::new(|| {
                let p = ModelParams::new(r(1, 2), r(1, 3))?;
                let mut count = 0;
                for code in 0..(3 * 3 * 3) {
                    let signs: Vec<i8> = (0..3).map(|k| ((code / 3i32.pow(k)) % 3 - 1) as i8).collect();
                    let (a, b) = reversal_check_exact(&signs, &p, 10)?;
                    if a != b {
                        return Err(convoy_core::Error::Internal(format!("{signs:?}")));
                    }
                    count += 1;
                }
                Ok(format!("{count} sequences exact"))
            }),
        ),
        (
            "H_n(1|q) = 1",
            Box::new(|| {
                let q = r(1, 3);
                let one = BigRational::from_integer(1.into());
                for n in 0..=30 {
                    if h_eval(n, &one, &q) != one {
                        return Err(convoy_core::Error::Internal(format!("n = {n}")));
                    }
                }
                Ok("n <= 30 exact".into())
            }),
        ),
        (
            "(-q;q)(q;q^2) = 1",
            Box::new(|| {
                let mut worst = 0.0f64;
                for k in 1..10 {
                    let q = k as f64 / 10.0;
                    worst = worst.max((qpoch_infinite(-q, q, 1e-15)? * qpoch_infinite(q, q * q, 1e-15)? - 1.0).abs());
                }
                if worst > 1e-10 {
                    return Err(convoy_core::Error::Internal(format!("gap {worst:e}")));
                }
                Ok(format!("max gap {worst:.1e}"))
            }),
        ),
        (
            "Gamma and 1F1",
            Box::new(|| {
                use num_complex::Complex64 as C;
                let g = complex_gamma(C::new(0.0, 1.0))?.norm_sqr();
                let want = std::f64::consts::PI / std::f64::consts::PI.sinh();
                let (a, b, z) = (C::new(1.0, -0.5), C::new(1.0, -1.0), C::new(-3.0, 0.0));
                let kummer = (hyp1f1_series(a, b, z)? - hyp1f1(a, b, z)?).norm();
                let j0 = (j_kernel(0.0, 0.0, 1.0)? - (-1f64).exp()).abs();
                if (g - want).abs() > 1e-10 || kummer > 1e-10 || j0 > 1e-15 {
                    return Err(convoy_core::Error::Internal(format!("{g} {kummer:e} {j0:e}")));
                }
                Ok("exact identities hold".into())
            }),
        ),
    ]
}

pub fn selftest(common: &Common) -> Result<ExitCode> {
    let rows: Vec<CheckRow> = self_checks()
        .into_iter()
        .map(|(check, f)| match f() {
            Ok(detail) => CheckRow {
                check,
                passed: true,
                detail,
            },
            Err(e) => CheckRow {
                check,
                passed: false,
                detail: e.to_string(),
            },
        })
        .collect();
    let text = match common.format {
        Format::Csv => {
            let mut t = Table::new(&["check", "status", "detail"]);
            for r in &rows {
                let status = if r.passed { "PASS" } else { "FAIL" };
                t.push(vec![r.check.into(), status.into(), r.detail.replace(',', ";")]);
            }
            t.render()
        }
        Format::Json => json(&rows)?,
    };
    write(common, &text)?;
    if rows.iter().all(|r| r.passed) {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}
