use std::process::{Command, Output};

use convoy_core::genocchi::q_genocchi;
use convoy_core::LaurentPoly;
use serde_json::Value;

fn convoy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convoy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn genocchi_rows() {
    let o = convoy(&["genocchi", "--n", "4"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[4], "14,36,45,35,18,6,1");
    let o = convoy(&["genocchi", "--n", "0"]);
    assert_eq!(stdout(&o), "1\n");
}

#[test]
fn genocchi_json_round_trips() {
    let o = convoy(&["genocchi", "--n", "6", "--format", "json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 7);
    for row in rows {
        let n = row["n"].as_u64().unwrap() as usize;
        let p: LaurentPoly = row["poly"].as_str().unwrap().parse().unwrap();
        assert_eq!(p, q_genocchi(n).unwrap());
        assert_eq!(p.to_string(), row["poly"].as_str().unwrap());
    }
    assert!(!convoy(&["genocchi", "--n", "41"]).status.success());
}

#[test]
fn exact_engines_match() {
    let o = convoy(&["convoy-exact", "--n", "2", "--q", "1/2", "--x", "1/2", "--method", "both"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.matches(",31/128,exact").count(), 2, "{text}");
    assert_eq!(text.lines().last(), Some("MATCH"));
    let o = convoy(&["convoy-exact", "--n", "3", "--q", "0.5", "--x", "0.25", "--exact", "--format", "json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["agreement"], "MATCH");
    assert_eq!(v["records"][0]["mode"], "exact");
}

#[test]
fn exit_codes() {
    assert_eq!(convoy(&["convoy-exact", "--n", "2", "--q", "1.5", "--x", "0.5"]).status.code(), Some(2));
    assert_eq!(convoy(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(convoy(&["convoy-mc", "--n", "10"]).status.code(), Some(2));
    let o = convoy(&["convoy-exact", "--n", "40", "--q", "0.5", "--x", "0.5", "--method", "dp"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(convoy(&["selftest"]).status.code(), Some(0));
}

#[test]
fn monte_carlo_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for threads in ["1", "3"] {
        let path = dir.path().join(format!("mc{threads}.json"));
        let o = Command::new(env!("CARGO_BIN_EXE_convoy"))
            .args(["convoy-mc", "--n", "200", "--q", "0.4", "--reps", "300", "--seed", "11", "--format", "json"])
            .arg("--out")
            .arg(&path)
            .env("CONVOY_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success());
        files.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn csv_and_json_carry_the_same_numbers() {
    let args = ["convoy-mc", "--n", "100", "--q", "0.5", "--reps", "200", "--seed", "5"];
    let csv = stdout(&convoy(&args));
    let mut json_args = args.to_vec();
    json_args.extend(["--format", "json"]);
    let v: Value = serde_json::from_str(&stdout(&convoy(&json_args))).unwrap();
    let summary: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let mean: f64 = summary[6].parse().unwrap();
    let stderr: f64 = summary[7].parse().unwrap();
    assert_eq!(mean, v["mean"].as_f64().unwrap());
    assert_eq!(stderr, v["stderr"].as_f64().unwrap());
    let hist_rows = csv.split("\n\n").nth(1).unwrap().lines().skip(1).count();
    assert_eq!(hist_rows, v["histogram"].as_array().unwrap().len());
}

#[test]
fn weak_limit_grid() {
    let o = convoy(&["weak-limit", "--gamma", "1", "--density", "x", "--lo", "-3", "--hi", "8", "--points", "221"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            (f[0], f[1])
        })
        .collect();
    let mass: f64 = rows.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[1].1 + w[0].1)).sum();
    assert!((mass - 1.0).abs() < 1e-2);
    let o = convoy(&["weak-limit", "--gamma", "8", "--density", "gap", "--format", "json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["expected_gap"].as_f64().unwrap() - 0.5379).abs() < 1e-3);
}

#[test]
fn km_verify_passes() {
    let o = convoy(&["km-verify", "--q", "0.3", "--x", "0.4", "--n", "10", "--imax", "4", "--format", "json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["max_abs_diff"].as_f64().unwrap() < 1e-8);
    assert_eq!(v["rows"].as_array().unwrap().len(), 5 * 5 * 11);
}
