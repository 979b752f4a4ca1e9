//! End-to-end runs of the `ltqm` binary: exit codes, config files, output
//! files and report contents.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ltqm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ltqm")).args(args).current_dir(dir).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn worked_example_report() {
    let dir = tempfile::tempdir().unwrap();
    let r = json(&ltqm(
        &["analyze", "--eps", "0.3", "--eta-d", "0.95", "--eta-s", "0.95", "--storage-aggregate", "0.85", "--storage-steps", "25"],
        dir.path(),
    ));
    assert_eq!(r["k"], 74);
    let p_store = r["p_store"].as_f64().unwrap();
    assert!((0.993..0.994).contains(&p_store));
    assert_eq!(r["tau_max_steps"], 33);
    for key in ["p_ii", "p_tree", "p_tree_fit", "p_cz", "p_mem", "threshold_margin", "tau_max_exact", "tau_max_core"] {
        assert!(r[key].is_number(), "{key}");
    }
}

#[test]
fn perfect_and_lossy_reports() {
    let dir = tempfile::tempdir().unwrap();
    let r = json(&ltqm(&["analyze", "--branch", "2,2"], dir.path()));
    assert_eq!(r["p_tree"], 1.0);
    assert_eq!(r["threshold_margin"], 0.5);
    let r = json(&ltqm(&["analyze", "--branch", "2,2", "--eps", "0.6"], dir.path()));
    assert_eq!(r["feasible"], false);
    assert!(r["notes"].as_array().unwrap().iter().any(|n| n.as_str().unwrap().contains("0.5")));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| ltqm(args, dir.path()).status.code();
    assert_eq!(code(&["analyze", "--eps", "1.5"]), Some(2));
    assert_eq!(code(&["analyze", "--branch", "2,0"]), Some(2));
    assert_eq!(code(&["memory", "--tree-eps", "0.3"]), Some(2));
    assert_eq!(code(&["optimize", "--eps", "0.6"]), Some(3));
    assert_eq!(code(&["selftest", "--graphs", "20"]), Some(0));
    assert_eq!(code(&["selftest", "--graphs", "5", "--force-c", "2"]), Some(1));
    assert_eq!(code(&["selftest", "--graphs", "5", "--tamper-recursion"]), Some(1));
}

#[test]
fn negative_controls_name_their_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = String::from_utf8(ltqm(&["selftest", "--graphs", "5", "--force-c", "2"], dir.path()).stdout).unwrap();
    assert!(out.lines().any(|l| l.starts_with("FAIL fit consistency")));
    let out = String::from_utf8(ltqm(&["selftest", "--graphs", "5", "--tamper-recursion"], dir.path()).stdout).unwrap();
    assert!(out.lines().any(|l| l.starts_with("FAIL reference tree")));
}

#[test]
fn optimizer_results() {
    let dir = tempfile::tempdir().unwrap();
    let r = json(&ltqm(&["optimize", "--eps", "0"], dir.path()));
    assert_eq!(r["branch"], "{1}");
    let r = json(&ltqm(&["optimize", "--eps", "0.45", "--target", "0.9", "--max-branch", "24"], dir.path()));
    assert!(r["p_tree"].as_f64().unwrap() >= 0.9);
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"branch": [3, 2], "eps": 0.3, "trials": 2000, "seed": 4}"#).unwrap();
    let from_file = json(&ltqm(&["tree-trials", "--config", "c.json"], dir.path()));
    assert_eq!(from_file["branch"], "{3,2}");
    assert_eq!(from_file["eps"], 0.3);
    let overridden = json(&ltqm(&["tree-trials", "--config", "c.json", "--eps", "0.1"], dir.path()));
    assert_eq!(overridden["eps"], 0.1);
    assert_eq!(overridden["estimate"]["trials"], 2000);
    assert_eq!(ltqm(&["tree-trials", "--config", "missing.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn memory_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["memory", "--unencoded", "--p-store", "0.993", "--horizon", "2000", "--trials", "200000", "--out", "u.csv"];
    assert!(ltqm(&args, dir.path()).status.success());
    let csv = std::fs::read_to_string(dir.path().join("u.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t_steps,p_mem,ci_low,ci_high"));
    let crossing = lines
        .map(|l| l.split(',').map(|x| x.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .find(|row| row[1] < 0.001)
        .map(|row| row[0]);
    assert!(crossing.is_some_and(|t| t <= 1000.0), "{crossing:?}");
    let sidecar: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("u.json")).unwrap()).unwrap();
    assert_eq!(sidecar["config"]["mode"]["kind"], "unencoded");
    assert_eq!(sidecar["config"]["trials"], 200000);
}

#[test]
fn single_trial_runs_repeat_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["memory", "--branch", "3,2", "--k", "4", "--tree-eps", "0.2", "--p-ii", "0.4", "--trials", "1", "--seed", "11"];
    let a = ltqm(&args, dir.path());
    let b = ltqm(&args, dir.path());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn failed_runs_leave_no_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = ltqm(&["memory", "--unencoded", "--p-store", "1.2", "--out", "bad.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn tree_dump_is_a_graph_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let r = json(&ltqm(&["tree", "--branch", "2,2", "--dump-graph"], dir.path()));
    assert_eq!(r["matches_direct"], true);
    assert_eq!(r["graph"]["vertices"].as_array().unwrap().len(), 8);
    assert_eq!(r["graph"]["edges"].as_array().unwrap().len(), 7);
    assert!(r["graph"]["lost"].as_array().unwrap().is_empty());
}

#[test]
fn csv_reports_are_key_value_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = ltqm(&["schedule", "--format", "csv"], dir.path());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("key,value\n"));
    assert!(text.lines().any(|l| l == "total_steps,33"));
}
