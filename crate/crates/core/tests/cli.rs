use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn surfent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surfent")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("summary JSON on stdout")
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn cat_cocycle_rate() {
    let out = surfent(&["estimate", "--system", "cat", "--method", "cocycle", "--n", "1..30"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let rate = v["estimates"]["cocycle"]["norm"]["rate"].as_f64().unwrap();
    assert!((rate - 0.962424).abs() < 1e-4, "rate {rate}");
    assert_eq!(v["entropy_exceeds_threshold"], Value::Bool(true));
    assert_eq!(v["config"]["n_list"].as_array().unwrap().len(), 30);
}

#[test]
fn identity_curve_rate_is_zero() {
    let out = surfent(&["estimate", "--system", "identity", "--method", "curve"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["estimates"]["curve"]["rate"].as_f64().unwrap(), 0.0);
}

#[test]
fn example_at_a_one_and_a_half_has_zero_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("ve");
    let out = surfent(&["verify-example", "--a", "1.5", "--n", "1..20", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let row = &v["restricted_growth"][0];
    assert!(row["residual"].as_f64().unwrap().abs() < 1e-6);
    assert_eq!(v["cos_integral_failures"], 0);
    let rows = data_rows(&out_dir.join("example.csv"));
    assert_eq!(rows[0], ["a", "n", "L_n", "rate", "theoretical", "residual"]);
    let last: f64 = rows.last().unwrap()[5].parse().unwrap();
    assert!(last.abs() < 1e-8, "last residual {last}");
    assert_eq!(data_rows(&out_dir.join("cos_integral.csv")).len(), 37);
}

#[test]
fn decompose_curve_writes_one_row_per_piece() {
    let dir = tempfile::tempdir().unwrap();
    let out = surfent(&["decompose-curve", "--eps", "0.01", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(data_rows(&dir.path().join("pieces.csv")).len(), 101);
    assert_eq!(json(&out)["covers_unit_interval"], Value::Bool(true));
}

#[test]
fn diagnose_times_reports_geometric_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = surfent(&["diagnose-times", "--system", "cat", "--n", "50", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let rows = data_rows(&dir.path().join("profile.csv"));
    let col = rows[0].iter().position(|h| h == "is_geometric").expect("is_geometric column");
    assert_eq!(rows.len(), 51);
    assert!(rows[1..].iter().all(|r| r[col] == "0" || r[col] == "1"));
    assert_eq!(json(&out)["gap_audit"], Value::Bool(true));
}

#[test]
fn reports_echo_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "system = standard\nparams = k=2\nmethod = cocycle,lambda\nn = 1..5\ngrid = 40\n").unwrap();
    let out = surfent(&["estimate", "--config", cfg.to_str().unwrap(), "--grid", "20", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["config"]["system"], "standard");
    assert_eq!(v["config"]["grid"], 20);
    let text = std::fs::read_to_string(dir.path().join("cocycle.csv")).unwrap();
    assert!(text.contains("# config grid=20"));
    assert!(text.contains("# config params=\"k=2\""));
    assert!(dir.path().join("lambda.csv").exists());
}

#[test]
fn exit_codes() {
    assert_eq!(surfent(&["estimate", "--system", "no-such-map"]).status.code(), Some(1));
    assert_eq!(surfent(&["estimate", "--n", "1..x"]).status.code(), Some(1));
    assert_eq!(surfent(&["estimate", "--method", "guess"]).status.code(), Some(1));
    assert_eq!(surfent(&["--version"]).status.code(), Some(0));
    let blocker = tempfile::NamedTempFile::new().unwrap();
    let nested = blocker.path().join("sub");
    let out = surfent(&["estimate", "--n", "1..3", "--grid", "10", "--out", nested.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "unwritable output path");
    let escape = surfent(&["diagnose-times", "--system", "diag", "--point", "1.9,1.9,0.5", "--n", "10"]);
    assert_eq!(escape.status.code(), Some(2));
}

#[test]
fn selftest_passes() {
    let out = surfent(&["selftest"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.ends_with("0 failed")));
    assert!(!text.contains("FAIL"));
}
