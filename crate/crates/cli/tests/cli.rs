use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opd-lab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok_json(dir: &Path, args: &[&str]) -> Value {
    let out = run(dir, args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_writes_requested_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["simulate", "--hurst", "0.8", "--psi", "0.5", "--n", "1000", "--seed", "3", "--cumsum"],
    );
    assert!(out.status.success());
    let path = std::fs::read_to_string(dir.path().join("path.csv")).unwrap();
    let mut lines = path.lines();
    assert_eq!(lines.next(), Some("j,y1,y2"));
    assert_eq!(lines.count(), 1000);
    let integrated = std::fs::read_to_string(dir.path().join("integrated.csv")).unwrap();
    assert!(integrated.starts_with("j,x1,x2\n"));
    let config = read_json(&dir.path().join("config.json"));
    assert!(config.to_string().contains("0.8"));
}

#[test]
fn invalid_parameters_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 4] = [
        &["simulate", "--hurst", "1.2", "--n", "100"],
        &["rosenblatt", "--d-star", "0.2", "--draws", "10"],
        &["limit-experiment", "--config", "missing.json"],
        &["opd", "--input", "missing.csv", "--h", "1"],
    ];
    for args in cases {
        let out = run(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn opd_of_a_series_with_itself_and_its_negation() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["simulate", "--hurst", "0.7", "--n", "500", "--seed", "4"]).status.success());
    let same = ok_json(
        dir.path(),
        &["opd", "--first", "path.csv", "--second", "path.csv", "--column", "y1", "--h", "2"],
    );
    assert_eq!(same["opd"].as_f64(), Some(1.0));
    assert_eq!(same["p_hat"].as_f64(), Some(1.0));
    let neg = ok_json(
        dir.path(),
        &[
            "opd", "--first", "path.csv", "--second", "path.csv", "--column", "y1", "--h", "2",
            "--negate-second",
        ],
    );
    assert_eq!(neg["p_hat"].as_f64(), Some(0.0));
    assert!(neg["opd"].as_f64().unwrap() < 0.0);
}

#[test]
fn opd_recovers_white_noise_coincidence_probability() {
    let dir = tempfile::tempdir().unwrap();
    let sim = run(
        dir.path(),
        &["simulate", "--hurst", "0.5", "--psi", "0.6", "--n", "100000", "--seed", "5"],
    );
    assert!(sim.status.success());
    let est = ok_json(dir.path(), &["opd", "--input", "path.csv", "--columns", "y1,y2", "--h", "1", "--increments"]);
    let p = 0.5 + 0.6f64.asin() / std::f64::consts::PI;
    let p_hat = est["p_hat"].as_f64().unwrap();
    assert!((p_hat - p).abs() < 5.0 * (p * (1.0 - p) / 1e5).sqrt(), "{p_hat} vs {p}");
    // opd = (p − q)/(1 − q) with q = 1/2 for h = 1
    assert!((est["opd"].as_f64().unwrap() - 0.4097).abs() < 0.02);
}

#[test]
fn limit_experiment_flags_follow_the_regime() {
    let dir = tempfile::tempdir().unwrap();
    let srd = ok_diag(
        dir.path(),
        "srd",
        &["--hurst", "0.6", "--psi", "0.6", "--h", "1", "--path-n", "5000", "--replications", "200", "--regime", "srd"],
    );
    assert_eq!(srd["ks_vs_normal_below_critical"], Value::Bool(true));
    assert_eq!(srd["ks_vs_limit"], Value::Null);

    let lrd = ok_diag(
        dir.path(),
        "lrd",
        &["--hurst", "0.9", "--psi", "0.6", "--h", "2", "--path-n", "20000", "--replications", "200", "--regime", "lrd"],
    );
    assert!(lrd["ks_vs_limit"].is_number());
    assert!(dir.path().join("lrd/qq_rosenblatt.csv").exists());
    assert!(!dir.path().join("srd/qq_rosenblatt.csv").exists());
    // at h = 1 the symmetric model gives w* = −w** and a symmetric limit; h = 2 does not
    assert!(lrd["skewness"].as_f64().unwrap() > srd["skewness"].as_f64().unwrap());
}

fn ok_diag(dir: &Path, name: &str, flags: &[&str]) -> Value {
    let mut args = vec!["limit-experiment", "--out-dir", name];
    args.extend_from_slice(flags);
    let out = run(dir, &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let values = std::fs::read_to_string(dir.join(name).join("values.csv")).unwrap();
    assert_eq!(values.lines().count(), 201);
    read_json(&dir.join(name).join("diagnostics.json"))["diagnostics"].clone()
}

#[test]
fn regime_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["limit-experiment", "--hurst", "0.9", "--h", "1", "--path-n", "1000", "--replications", "10", "--regime", "srd"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rosenblatt_writes_draws() {
    let dir = tempfile::tempdir().unwrap();
    let stats = ok_json(
        dir.path(),
        &["rosenblatt", "--d-star", "0.35", "--draws", "100", "--inner-n", "2000", "--seed", "6"],
    );
    assert_eq!(stats["n"].as_u64(), Some(100));
    let draws = std::fs::read_to_string(dir.path().join("draws.csv")).unwrap();
    assert_eq!(draws.lines().next(), Some("z"));
    assert_eq!(draws.lines().count(), 101);
}

#[test]
fn closed_form_weights_match_monte_carlo() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["weights", "--hurst", "0.8", "--psi", "0.6", "--h", "1"];
    let exact = ok_json(dir.path(), &[&args[..], &["--closed-form"]].concat());
    let mc = ok_json(dir.path(), &[&args[..], &["--draws", "200000", "--seed", "7"]].concat());
    for (i, j) in [(0, 0), (0, 1)] {
        let a = exact["alpha_tilde"][i][j].as_f64().unwrap();
        let b = mc["alpha_tilde"][i][j].as_f64().unwrap();
        let se = mc["alpha_tilde_std_err"][i][j].as_f64().unwrap();
        assert!((a - b).abs() < 4.0 * se, "({i},{j}): {a} vs {b} ± {se}");
    }
}
