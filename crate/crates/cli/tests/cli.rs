//! End-to-end checks of the command-line surface: exit codes, report
//! artifacts, and byte-identical reruns.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ergodual"))
}

#[test]
fn list_models_exits_zero() {
    let out = bin().arg("list-models").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("swap2"));
    assert!(text.contains("cycles-line"));
}

#[test]
fn diagnose_swap2_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["diagnose", "--model", "swap2", "--scheme", "cesaro", "--n-max", "64"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(parsed["schema_version"], 1);
    assert!(parsed["config_sha256"].as_str().unwrap().len() == 64);
    assert_eq!(parsed["model"]["states"], 2);
    assert!(dir.path().join("as3_function_decay.csv").exists());
    let csv = std::fs::read_to_string(dir.path().join("as3_function_decay.csv")).unwrap();
    assert!(csv.starts_with("index,value"));
}

#[test]
fn diagnose_backward_e_property_fails_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "diagnose",
            "--model",
            "z-infinity",
            "--truncation",
            "16",
            "--scheme",
            "backward-cesaro",
            "--check",
            "e-property",
        ])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("e-property: Fail"), "{text}");
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["diagnose", "--model", "no-such-model"],
        vec!["diagnose", "--model", "swap2", "--scheme", "bogus"],
        vec!["diagnose", "--model", "swap2", "--check", "bogus"],
        vec!["reproduce", "ex99"],
    ] {
        let out = bin().args(&args).arg("--out").arg(dir.path()).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "args {args:?}");
    }
    // clap usage errors share the code
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.json");
    std::fs::write(
        &cfg_path,
        r#"{ "model": "swap2", "scheme": "cesaro", "n_max": 16, "diagnostics": ["as1"] }"#,
    )
    .unwrap();
    let out = bin()
        .args(["diagnose", "--config"])
        .arg(&cfg_path)
        .args(["--check", "as3"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    // the flag replaced the config's diagnostics list
    assert_eq!(report["config"]["diagnostics"], serde_json::json!(["as3"]));
    assert_eq!(report["config"]["n_max"], 16);
}

fn dir_bytes(path: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(path)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    entries.sort();
    entries
}

#[test]
fn reruns_are_byte_identical() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        let out = bin()
            .args([
                "diagnose",
                "--model",
                "irreducible3",
                "--scheme",
                "cesaro",
                "--n-max",
                "256",
                "--seed",
                "7",
                "--allow-inconclusive",
            ])
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(dir_bytes(dir_a.path()), dir_bytes(dir_b.path()));
}

#[test]
fn export_plotdata_empty_diagnostics_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("empty");
    let out = bin()
        .args(["export-plotdata", "--model", "swap2"])
        .arg("--out")
        .arg(&sub)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(!sub.exists() || std::fs::read_dir(&sub).unwrap().next().is_none());
}

#[test]
fn export_plotdata_writes_projection_gap() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "export-plotdata",
            "--model",
            "swap2",
            "--n-max",
            "64",
            "--check",
            "projection",
            "--check",
            "as3",
            "--allow-inconclusive",
        ])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let gap = std::fs::read_to_string(dir.path().join("projection_gap.csv")).unwrap();
    let mut lines = gap.lines();
    assert_eq!(lines.next().unwrap(), "index,value");
    // swap averages hit the projection exactly at every even index
    let at_2: Vec<&str> = lines.find(|l| l.starts_with("2,")).unwrap().split(',').collect();
    let v: f64 = at_2[1].parse().unwrap();
    assert_eq!(v, 0.0);
    assert!(dir.path().join("as3_function_decay.csv").exists());
}

#[test]
fn reproduce_summing_passes() {
    let dir = tempfile::tempdir().unwrap();
    let verdict_path = dir.path().join("verdict.json");
    let out = bin()
        .args(["reproduce", "ex61", "--out"])
        .arg(&verdict_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("fixture comparison: PASS"), "{text}");
    let verdict: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&verdict_path).unwrap()).unwrap();
    assert_eq!(verdict["pass"], true);
    assert_eq!(verdict["example"], "summing-l1");
}

#[test]
fn reproduce_cycles_line_passes() {
    let out = bin().args(["reproduce", "cycles-line"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("obstruction sweep"), "{text}");
    assert!(text.contains("fixture comparison: PASS"), "{text}");
}
