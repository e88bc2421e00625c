use std::fs;
use std::path::Path;
use std::process::Command;

fn czsd() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_czsd"));
    c.env("RUST_LOG", "warn");
    c
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.json");
    fs::write(&path, body).unwrap();
    path
}

const QUAD: &str = r#"{
    "problem": {"problem": "pl_quadratic", "n": 5, "p": 3},
    "topology": {"kind": "ring"},
    "iterations": 40,
    "seeds": [7],
    "thresholds": [1.0],
    "record_wall_time": false
}"#;

#[test]
fn run_writes_traces_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUAD);
    let out = dir.path().join("out");
    let status = czsd()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "1", "--seed", "2", "--iters", "30", "--algo", "zsdpd"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(out.join("trace_000_seed1.csv").exists());
    assert!(out.join("trace_001_seed2.csv").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["algorithm"], "zsdpd");
    assert_eq!(summary["iterations"], 30);
    assert_eq!(summary["seeds"].as_array().unwrap().len(), 2);
    let trace = fs::read_to_string(out.join("trace_000_seed1.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 3);
    assert!(String::from_utf8_lossy(&status.stdout).contains("zsdpd: P(T)"));
}

#[test]
fn missing_config_fails() {
    let status = czsd()
        .args(["run", "--config", "/nonexistent/run.json"])
        .output()
        .unwrap();
    assert!(!status.status.success());
}

#[test]
fn invalid_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"problem": {"problem": "logistic", "n": 3, "p": 2}}"#);
    let status = czsd().arg("run").arg("--config").arg(&cfg).output().unwrap();
    assert!(!status.status.success());
    assert!(String::from_utf8_lossy(&status.stderr).contains("config"));
}

#[test]
fn all_diverged_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
            "problem": {"problem": "logistic", "n": 8, "p": 10},
            "topology": {"kind": "complete"},
            "schedule": {"regime": "table1"},
            "iterations": 300,
            "seeds": [1, 2]
        }"#,
    );
    let out = dir.path().join("out");
    let status = czsd()
        .arg("run")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(!status.status.success());
    assert!(String::from_utf8_lossy(&status.stderr).contains("diverged"));
}

#[test]
fn rejects_unknown_algorithm() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUAD);
    let status = czsd()
        .arg("run")
        .arg("--config")
        .arg(&cfg)
        .args(["--algo", "gossip"])
        .output()
        .unwrap();
    assert!(!status.status.success());
}
