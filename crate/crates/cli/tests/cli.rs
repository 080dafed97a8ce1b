use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ioncool"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("IONCOOL_THREADS")
        .output()
        .unwrap()
}

fn error_doc(out: &Output) -> Value {
    let line = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(line.trim()).unwrap()
}

fn artifacts(dir: &Path, ext: &str) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    v.sort();
    v
}

#[test]
fn cooling_limit_reproduces_reference_n0() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["cooling-limit", "--format", "json"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["study"], "cooling-limit");
    assert_eq!(doc["config_sha256"].as_str().unwrap().len(), 64);
    let csv = fs::read_to_string(&artifacts(dir.path(), "csv")[0]).unwrap();
    assert!(csv.starts_with("# ioncool "));
    assert!(!csv.contains('\r'));
    assert!(csv.contains("config_sha256="));
}

#[test]
fn trajectory_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["trajectory", "--set", "schedule.total_gates=10"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(&artifacts(dir.path(), "csv")[0]).unwrap();
    let mut lines = csv.lines().skip(1);
    assert_eq!(lines.next(), Some("t_seconds,n_quanta,phase_label"));
    for line in lines {
        let label = line.rsplit(',').next().unwrap();
        assert!(["gate", "cool", "radial"].contains(&label), "{line}");
    }
}

#[test]
fn config_file_and_overrides_are_hashed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[chain]\nn_ions = 9\nn_coolants = 1\n").unwrap();
    let a = run(dir.path(), &["modes", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    let b = run(dir.path(), &["modes", "--config", cfg.to_str().unwrap(), "--set", "chain.n_ions=11", "--format", "json"]);
    assert!(a.status.success() && b.status.success());
    let a: Value = serde_json::from_slice(&a.stdout).unwrap();
    let b: Value = serde_json::from_slice(&b.stdout).unwrap();
    assert_eq!(a["config"]["chain"]["n_ions"], 9);
    assert_eq!(b["config"]["chain"]["n_ions"], 11);
    assert_eq!(a["rows"], 9);
    assert_ne!(a["config_sha256"], b["config_sha256"]);
    assert_eq!(artifacts(dir.path(), "json").len(), 2);
}

#[test]
fn unknown_key_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["modes", "--set", "chain.n_ion=3"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_doc(&out)["error"]["kind"], "schema");
}

#[test]
fn impossible_coolant_count_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["cooling-limit", "--set", "chain.n_ions=1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unconfined_chain_exits_with_convergence_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["equilibrium", "--set", "trap.x2=-5.0", "--set", "chain.n_ions=3"]);
    assert_eq!(out.status.code(), Some(3));
    let doc = error_doc(&out);
    assert_eq!(doc["error"]["kind"], "convergence");
    assert_eq!(doc["error"]["exit_code"], 3);
}

#[test]
fn oversized_enumeration_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["placement-scan", "--set", "chain.n_ions=30", "--set", "chain.n_coolants=15"],
    );
    assert_eq!(out.status.code(), Some(4));
    assert!(error_doc(&out)["error"]["message"].as_str().unwrap().contains("155117520"));
    assert!(artifacts(dir.path(), "csv").is_empty());
}

#[test]
fn missing_config_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["modes", "--config", "/nonexistent/run.toml"]);
    assert_eq!(out.status.code(), Some(1));
}
