//! End-to-end runs of the command-line tool in temporary directories.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shrinker-glue"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn roots_json_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["roots", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let r_mu = v["r_mu"].as_f64().unwrap();
    assert!((r_mu - 1.52).abs() < 0.01);
    assert_eq!(v["passed"], Value::Bool(true));
    assert_eq!(v["wronskian"].as_array().unwrap().len(), 18);
    assert_eq!(v["config"]["two_J"], 1);
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted, "keys are emitted in a fixed order");
    assert_eq!(json_file(&dir.path().join("out/roots.json")), v);
}

#[test]
fn invalid_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["--m", "1", "roots"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["--two-J", "0", "balance"]).status.code(), Some(2));
    std::fs::write(dir.path().join("bad.json"), r#"{"alpha": 0.3}"#).unwrap();
    assert_eq!(run(dir.path(), &["--config", "bad.json", "roots"]).status.code(), Some(2));
    std::fs::write(dir.path().join("typo.json"), r#"{"mm": 3}"#).unwrap();
    assert_eq!(run(dir.path(), &["--config", "typo.json", "roots"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["--config", "missing.json", "roots"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["check", "--filter", "nothing"]).status.code(), Some(2));
}

#[test]
fn balance_then_reseeded_balance_is_a_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--two-J", "2", "--m", "64", "balance", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["residual"].as_f64().unwrap() < 1e-6);
    let pv = v["pv_flat"].clone();
    let cfg = serde_json::json!({ "two_J": 2, "m": 64, "seed_pv": pv, "output_dir": "again" });
    std::fs::write(dir.path().join("seed.json"), cfg.to_string()).unwrap();
    let out = run(dir.path(), &["--config", "seed.json", "balance", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let w: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(w["iterations"].as_u64().unwrap() <= 1);
    assert_eq!(w["config"]["seed_pv"], pv);
    assert!(dir.path().join("again/balance.json").exists());
}

#[test]
fn non_convergence_exits_nonzero_with_trace() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"two_J": 3, "m": 96, "max_iter": 1, "tol": 1e-14}"#).unwrap();
    let out = run(dir.path(), &["--config", "c.json", "balance"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no convergence"));
}

#[test]
fn surface_outputs_are_complete_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(dir.path(), &["--m", "8", "--out", "a", "surface"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = run(dir.path(), &["--m", "8", "--out", "b", "surface"]);
    assert_eq!(b.status.code(), Some(0));
    for f in ["surface.obj", "surface.ply", "topology.json", "residual.json", "cone_slopes.csv", "balance.json"] {
        assert!(dir.path().join("a").join(f).exists(), "{f}");
    }
    let pa = std::fs::read(dir.path().join("a/surface.ply")).unwrap();
    let pb = std::fs::read(dir.path().join("b/surface.ply")).unwrap();
    // the echoed output directory is the only difference
    let strip = |v: &[u8]| String::from_utf8_lossy(v).replace("\"output_dir\":\"a\"", "").replace("\"output_dir\":\"b\"", "");
    assert_eq!(strip(&pa), strip(&pb));
    let topo = json_file(&dir.path().join("a/topology.json"));
    assert_eq!(topo["topology"]["genus"], 7.0);
    assert_eq!(topo["topology"]["boundary_loops"], 2);
    assert_eq!(topo["config"]["m"], 8);
    // a second run reuses the stored parameters
    let c = run(dir.path(), &["--m", "8", "--out", "a", "surface", "--json"]);
    let v: Value = serde_json::from_slice(&c.stdout).unwrap();
    assert_eq!(v["pv_source"], "balance.json");
}

#[test]
fn two_level_surface_topology() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--two-J", "2", "--m", "8", "surface", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["topology"]["genus"], 14.0);
    assert_eq!(v["topology"]["boundary_loops"], 3);
}

#[test]
fn filtered_check_writes_junit() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["check", "--filter", "specfun"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 5);
    assert!(!text.contains(" rld "));
    let xml = std::fs::read_to_string(dir.path().join("out/junit.xml")).unwrap();
    assert!(xml.contains("<testsuite name=\"specfun\""));
    assert!(!xml.contains("<failure"));
    let report = json_file(&dir.path().join("out/check_report.json"));
    assert_eq!(report["filter"], "specfun");
    assert_eq!(report["config"]["m"], 64);
}
