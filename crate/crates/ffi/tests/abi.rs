//! Exercises the C ABI through its Rust declarations.

use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use oneform_lab_ffi::*;

fn last_error() -> String {
    let p = ofl_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn paths_scenario_round_trip() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(ofl_config_new(OflScenario::Paths, &mut cfg), OflStatus::Ok);
        assert_eq!(ofl_config_set_seed(cfg, 5), OflStatus::Ok);
        let mut report = ptr::null_mut();
        assert_eq!(ofl_run(cfg, &mut report), OflStatus::Ok);
        assert!(ofl_last_error().is_null());

        let mut pass = false;
        assert_eq!(ofl_report_pass(report, &mut pass), OflStatus::Ok);
        assert!(pass);
        let (mut total, mut failed) = (0, 1);
        assert_eq!(
            ofl_report_counts(report, &mut total, &mut failed),
            OflStatus::Ok
        );
        assert!(total > 0);
        assert_eq!(failed, 0);

        let mut json = ptr::null_mut();
        assert_eq!(ofl_report_to_json(report, &mut json), OflStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        ofl_string_destroy(json);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["scenario"], "paths");
        assert_eq!(v["seed"], 5);

        let dir = tempfile::tempdir().unwrap();
        let d = CString::new(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(ofl_report_write(report, d.as_ptr()), OflStatus::Ok);
        assert!(dir.path().join("report.json").exists());

        ofl_report_destroy(report);
        ofl_config_destroy(cfg);
    }
}

#[test]
fn config_errors_are_reported() {
    unsafe {
        let mut cfg = ptr::null_mut();
        let bad = CString::new("[lattice]\nN = 99\n").unwrap();
        assert_eq!(
            ofl_config_parse(bad.as_ptr(), 0, &mut cfg),
            OflStatus::Config
        );
        assert!(cfg.is_null());
        assert!(last_error().contains("lattice.N"));

        let json = CString::new(r#"{"scenario": "closure", "seed": 3}"#).unwrap();
        assert_eq!(ofl_config_parse(json.as_ptr(), 1, &mut cfg), OflStatus::Ok);
        let mut echo = ptr::null_mut();
        assert_eq!(ofl_config_to_json(cfg, &mut echo), OflStatus::Ok);
        assert!(CStr::from_ptr(echo)
            .to_str()
            .unwrap()
            .contains("\"closure\""));
        ofl_string_destroy(echo);

        assert_eq!(ofl_config_set_hbar(cfg, -1.0), OflStatus::Ok);
        let mut report = ptr::null_mut();
        assert_eq!(ofl_run(cfg, &mut report), OflStatus::Config);
        assert!(report.is_null());
        ofl_config_destroy(cfg);

        let missing = CString::new("/nonexistent/run.toml").unwrap();
        assert_eq!(
            ofl_config_load(missing.as_ptr(), &mut cfg),
            OflStatus::Config
        );
    }
}

#[test]
fn null_and_invalid_arguments() {
    unsafe {
        assert_eq!(
            ofl_config_new(OflScenario::Loop, ptr::null_mut()),
            OflStatus::NullPointer
        );
        assert_eq!(
            ofl_run(ptr::null(), ptr::null_mut()),
            OflStatus::NullPointer
        );
        assert!(last_error().contains("null"));
        let mut cfg = ptr::null_mut();
        assert_eq!(
            ofl_config_parse(ptr::null(), 0, &mut cfg),
            OflStatus::NullPointer
        );
        let not_utf8 = [0xffu8, 0xfe, 0];
        assert_eq!(
            ofl_config_parse(not_utf8.as_ptr().cast(), 0, &mut cfg),
            OflStatus::InvalidUtf8
        );
        ofl_config_destroy(ptr::null_mut());
        ofl_report_destroy(ptr::null_mut());
        ofl_hierarchy_destroy(ptr::null_mut());
        ofl_string_destroy(ptr::null_mut());
    }
}

#[test]
fn hierarchies() {
    unsafe {
        let mut free = ptr::null_mut();
        assert_eq!(ofl_hierarchy_new_free(16, &mut free), OflStatus::Ok);
        let mut z = f64::NAN;
        assert_eq!(
            ofl_hierarchy_curvature(free, 0.3, 0.7, &mut z),
            OflStatus::Ok
        );
        assert!(z <= 1e-10);
        let mut r = f64::NAN;
        assert_eq!(
            ofl_hierarchy_loop_residual(free, 0.0, 0.0, 1.0, 1.0, 50, &mut r),
            OflStatus::Ok
        );
        assert!(r <= 1e-10);
        ofl_hierarchy_destroy(free);

        let mut osc = ptr::null_mut();
        assert_eq!(
            ofl_hierarchy_new_oscillator_pair(16, 1.0, 2.0, 1.0, &mut osc),
            OflStatus::Ok
        );
        assert_eq!(
            ofl_hierarchy_curvature(osc, 0.0, 0.0, &mut z),
            OflStatus::Ok
        );
        assert!(z >= 0.1);
        assert_eq!(
            ofl_hierarchy_loop_residual(osc, 0.0, 0.0, -0.1, 0.1, 50, &mut r),
            OflStatus::Config
        );
        ofl_hierarchy_destroy(osc);

        assert_eq!(
            ofl_hierarchy_new_oscillator_pair(16, 1.0, 2.0, 0.0, &mut osc),
            OflStatus::Config
        );
        assert_eq!(ofl_hierarchy_new_free(1, &mut free), OflStatus::Config);
    }
}

#[test]
fn counts_and_kernels() {
    unsafe {
        let mut n = 0;
        assert_eq!(ofl_count_paths(2, 4, &mut n), OflStatus::Ok);
        assert_eq!(n, 70);
        assert_eq!(ofl_count_paths(3, 2, &mut n), OflStatus::Ok);
        assert_eq!(n, 90);

        let mut k = OflKernel::default();
        assert_eq!(ofl_ho_kernel(1.0, 0.5, 1.0, &mut k), OflStatus::Ok);
        let cot = 0.5f64.cos() / 0.5f64.sin();
        assert!((k.a_re - cot / 2.0).abs() < 1e-14 && k.a_im == 0.0);
        assert!((k.b_re + 1.0 / (2.0 * 0.5f64.sin())).abs() < 1e-14);
        assert_eq!(k.phase_index, 0);

        assert_eq!(
            ofl_ho_kernel(1.0, std::f64::consts::PI, 1.0, &mut k),
            OflStatus::Compute
        );
        assert!(last_error().contains("caustic"));
    }
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(ofl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_entry_point_and_compiles() {
    let header_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/oneform_lab.h");
    let header = std::fs::read_to_string(&header_path).unwrap();
    let source = include_str!("../src/lib.rs");
    let exported: Vec<&str> = source
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|s| s.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 20);
    for name in exported {
        let declared = [" ", "*"]
            .iter()
            .any(|lead| header.contains(&format!("{lead}{name}(")));
        assert!(declared, "{name} missing from header");
    }

    let dir = tempfile::tempdir().unwrap();
    let probe = dir.path().join("probe.c");
    std::fs::write(
        &probe,
        "#include \"oneform_lab.h\"\nint main(void) { OflConfig *c = 0; return (int)ofl_config_new(OFL_SCENARIO_PATHS, &c); }\n",
    )
    .unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    match Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header_path.parent().unwrap())
        .arg(&probe)
        .output()
    {
        Ok(out) => assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        ),
        Err(e) => println!("C compiler {cc} unavailable ({e}); header syntax not checked"),
    }
}
