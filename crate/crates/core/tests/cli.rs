//! End-to-end runs of the `oneform-lab` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oneform-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("ONEFORM_LAB_THREADS")
        .output()
        .unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(|c| c.parse().unwrap()).collect())
        .collect()
}

fn assertion<'a>(r: &'a Value, name: &str) -> &'a Value {
    r["sections"][0]["assertions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|a| a["name"] == name)
        .unwrap_or_else(|| panic!("no assertion {name}"))
}

#[test]
fn paths_counts_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["paths", "--ntimes", "2", "--N", "4"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = report(dir.path());
    assert_eq!(r["pass"], true);
    assert_eq!(r["scenario"], "paths");
    assert_eq!(assertion(&r, "enumerated paths")["value"], 70.0);
    assert_eq!(
        r["sections"][0]["info"]["paths"].as_array().unwrap().len(),
        70
    );
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["paths", "--ntimes", "3", "--N", "2", "--seed", "11"];
    assert_eq!(run(&args, a.path()).status.code(), Some(0));
    assert_eq!(run(&args, b.path()).status.code(), Some(0));
    let ra = fs::read(a.path().join("report.json")).unwrap();
    let rb = fs::read(b.path().join("report.json")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn free_curvature_passes_with_heat_map() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["curvature", "--builtin", "free", "--dim", "32"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let files = report(dir.path())["sections"][0]["files"].clone();
    let first = files[0].as_str().unwrap();
    let rows = csv_rows(&dir.path().join(first));
    assert_eq!(rows.len(), 25);
    assert!(rows.iter().all(|r| r.len() == 3 && r[2] <= 1e-7));
}

#[test]
fn equal_frequency_kernel_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "kernel",
            "--appendix-e",
            "--w1",
            "1",
            "--w2",
            "1",
            "--T1",
            "0.4",
            "--T2",
            "0.4",
            "--N",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn hbar_scan_is_written_in_ascending_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["kernel", "--N", "1"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&dir.path().join("hbar_scan.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[0][0] < w[1][0]));
    assert!(rows.iter().all(|r| r[2] > 0.0));
}

#[test]
fn oscillator_loop_scaling_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["loop", "--builtin", "oscillator-pair", "--dim", "8"],
        dir.path(),
    );
    assert!(matches!(out.status.code(), Some(0 | 1)));
    let rows = csv_rows(&dir.path().join("loop_scaling.csv"));
    assert!(rows.len() >= 3);
    assert!(rows.windows(2).all(|w| w[1][1] < w[0][1]));
}

#[test]
fn impossible_tolerance_is_an_assertion_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["closure", "--tol", "1e-30"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));
    assert_eq!(report(dir.path())["pass"], false);
}

#[test]
fn caustic_is_a_compute_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "kernel",
            "--w1",
            "1",
            "--w2",
            "1",
            "--T1",
            "3.141592653589793",
            "--N",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("caustic"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[lattice]\nN = 2\nbogus = 1\n").unwrap();
    let out = run(&["paths", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("bogus"), "{err}");

    let out = Command::new(env!("CARGO_BIN_EXE_oneform-lab"))
        .args(["paths", "--out"])
        .arg(dir.path())
        .env("ONEFORM_LAB_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["paths", "--N", "9"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lattice.N"));
}

#[test]
fn json_config_and_gauge_expressions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"hierarchy": {"builtin": "free", "dim": 16, "gauges": ["q: 0.3*t1 - 0.2*t2; p: 0.1*t1*t2"]}}"#,
    )
    .unwrap();
    let out = run(
        &["curvature", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = report(dir.path());
    assert!(r["sections"][0]["assertions"]
        .as_array()
        .unwrap()
        .iter()
        .any(|a| a["name"].as_str().unwrap().contains("custom-1")));
}
