use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

const BINARY: &str = r#"{"support":[0.0,0.5],"cum_mass":[0.5,1.0]}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_yieldopt")).args(args).output().expect("spawn")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn thresholds_for_canonical_binary() {
    let out = run(&["thresholds", "--dist", BINARY, "--penalty", "1", "--supply", "2", "--grid", "0.001"]);
    let v = stdout_json(&out);
    assert!((v["binary_closed_form"].as_f64().unwrap() - 0.306853).abs() < 1e-6);
    let s = v["thresholds"][0].as_f64().unwrap();
    assert!((s - 0.306853).abs() <= 1e-3, "{s}");
}

#[test]
fn unknown_subcommand_is_usage_error() {
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
}

#[test]
fn simulate_requires_seed() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let gen = run(&["gen", "--kind", "complete", "--m", "2", "--n", "3", "--supply", "2", "--out", inst.to_str().unwrap()]);
    assert!(gen.status.success());
    let out = run(&["simulate", "--instance", inst.to_str().unwrap(), "--dist", BINARY, "--penalty", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "validation");
}

#[test]
fn invalid_distribution_is_validation_error() {
    let out = run(&["thresholds", "--dist", r#"{"support":[0.0,2.0],"cum_mass":[0.5,1.0]}"#, "--penalty", "1", "--supply", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let inst_s = inst.to_str().unwrap();
    assert!(run(&["gen", "--kind", "triangular", "--m", "6", "--n", "4", "--supply", "2", "--seed", "9", "--out", inst_s])
        .status
        .success());
    let sim = || {
        let csv = dir.path().join("run.csv");
        let report = dir.path().join("run.json");
        let out = run(&[
            "simulate", "--instance", inst_s, "--dist", BINARY, "--penalty", "1", "--seed", "5", "--seeds", "4",
            "--out", csv.to_str().unwrap(), "--report", report.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (fs::read(csv).unwrap(), fs::read(report).unwrap())
    };
    let (a_csv, a_report) = sim();
    let (b_csv, b_report) = sim();
    assert_eq!(a_csv, b_csv);
    assert_eq!(a_report, b_report);
    let text = String::from_utf8(a_csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("seed,reward,exchange_revenue,penalty_paid,fill_rate"));
    assert_eq!(lines.count(), 4);
    let report: Value = serde_json::from_slice(&a_report).unwrap();
    assert_eq!(report["config"]["seeds"], serde_json::json!([5, 6, 7, 8]));
    assert!(report["tool_version"].is_string());
}

#[test]
fn config_echo_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        format!(r#"{{"schema":1,"dist":{BINARY},"penalty":1.0,"supply":2.0,"instance":{{"m":4,"n":3,"seed":2}},"seeds":[1,2]}}"#),
    )
    .unwrap();
    let report = dir.path().join("r.json");
    let first = run(&["simulate", "--config", cfg.to_str().unwrap(), "--report", report.to_str().unwrap()]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let echoed: Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    let cfg2 = dir.path().join("cfg2.json");
    fs::write(&cfg2, serde_json::to_vec(&echoed["config"]).unwrap()).unwrap();
    let second = run(&["simulate", "--config", cfg2.to_str().unwrap()]);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn config_and_flag_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, format!(r#"{{"schema":1,"dist":{BINARY},"penalty":1.0,"supply":2.0}}"#)).unwrap();
    let out = run(&["thresholds", "--config", cfg.to_str().unwrap(), "--dist", BINARY]);
    assert_eq!(out.status.code(), Some(2));
    fs::write(&cfg, r#"{"schema":7}"#).unwrap();
    assert_eq!(run(&["thresholds", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn matching_csv_header() {
    let out = run(&["matching", "--m", "8", "--supply", "2", "--trials", "3", "--seed", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("trial,weight,ratio\n"));
    assert_eq!(text.lines().count(), 4);
    assert_eq!(run(&["matching", "--m", "8", "--supply", "2", "--trials", "3"]).status.code(), Some(2));
}

#[test]
fn ratio_at_unit_supply_reports_absolute_values() {
    let v = stdout_json(&run(&["ratio", "--supply", "1", "--q", "0.5", "--r", "0.5", "--penalty", "1"]));
    assert!(v["ratio"].is_null());
    let v = stdout_json(&run(&["ratio", "--supply", "2", "--q", "0.5", "--r", "0.5", "--penalty", "1"]));
    assert!((v["ratio"].as_f64().unwrap() - 0.28447).abs() < 1e-3);
}

#[test]
fn oracle_formula_and_beta() {
    let v = stdout_json(&run(&["oracle", "--mode", "opt-formula", "--dist", BINARY, "--supply", "2", "--demand", "1"]));
    assert!((v["value"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let v = stdout_json(&run(&[
        "oracle", "--mode", "beta", "--dist", BINARY, "--supply", "2", "--thresholds", "0.3,1", "--t", "1000",
    ]));
    assert!(v["max_abs_difference"].as_f64().unwrap() < 1e-9);
}

#[test]
fn repro_single_experiment() {
    let out = run(&["repro", "supply-factor"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("[PASS]"));
    assert_eq!(run(&["repro", "nope"]).status.code(), Some(2));
}
