//! End-to-end checks of the command-line binary: build/verify round
//! trips, failure exit codes on tampered files, and flag validation.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_subshift"))
}

fn build_chain(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let s1 = dir.join("s1.json");
    let s2 = dir.join("s2.json");
    let out = bin()
        .args(["build", "--d", "1", "--out"])
        .arg(&s1)
        .output()
        .unwrap();
    assert!(out.status.success(), "init failed: {out:?}");
    let out = bin()
        .args([
            "build", "--m", "2", "--l", "8", "--dk", "1/2", "--nu", "1/10", "--slack", "1/2",
            "--target", "40", "--budget", "4000", "--seed", "1", "--fill", "random", "--in",
        ])
        .arg(&s1)
        .arg("--out")
        .arg(&s2)
        .output()
        .unwrap();
    assert!(out.status.success(), "build failed: {out:?}");
    (s1, s2)
}

#[test]
fn build_then_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (s1, s2) = build_chain(dir.path());
    let out = bin().arg("verify").arg(&s1).arg(&s2).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "verify failed: {out:?}");
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["format"], 1);
    assert_eq!(report["pass"], true);
    assert_eq!(report["k"], 1);
}

#[test]
fn same_seed_builds_byte_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let (_, s2) = build_chain(dir.path());
    let dir2 = tempfile::tempdir().unwrap();
    let (_, s2b) = build_chain(dir2.path());
    assert_eq!(
        std::fs::read(&s2).unwrap(),
        std::fs::read(&s2b).unwrap(),
        "same seed and parameters must reproduce the stage file exactly"
    );
}

#[test]
fn rewritten_stage_file_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (_, s2) = build_chain(dir.path());
    let stage = subshift::construction::Stage::read_file(&s2).unwrap();
    let copy = dir.path().join("s2copy.json");
    stage.write_file(&copy).unwrap();
    assert_eq!(std::fs::read(&s2).unwrap(), std::fs::read(&copy).unwrap());
}

#[test]
fn tampered_stage_fails_verification_with_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let (s1, s2) = build_chain(dir.path());
    // overwrite one stored pattern with a constant word: kills both the
    // residue coverage of the other symbol and the frequency windows
    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&s2).unwrap()).unwrap();
    doc["patterns"][0] = serde_json::Value::String("1".repeat(17));
    let bad = dir.path().join("s2bad.json");
    std::fs::write(&bad, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    let out = bin().arg("verify").arg(&s1).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "tampered verify: {out:?}");
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], false);
    assert!(!report["counterexamples"].as_array().unwrap().is_empty());
}

#[test]
fn unknown_flag_exits_with_config_error() {
    let out = bin().arg("--frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["lln", "--n", "8", "--frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_build_parameters_exit_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let (s1, _) = build_chain(dir.path());
    let out = bin()
        .args(["build", "--in"])
        .arg(&s1)
        .arg("--out")
        .arg(dir.path().join("next.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "missing params: {out:?}");
}

#[test]
fn lln_reports_the_exact_fraction() {
    let out = bin()
        .args(["lln", "--d", "1", "--n", "20", "--c", "2", "--epsilon", "1/10", "--m", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["value"], "130169/262144");
}
