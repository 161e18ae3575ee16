use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mfbubble(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfbubble"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}); stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

/// One coarse point that still leaves room outside `B_{2tR0}`.
const POINT_CFG: &str = "\
t = 0.15
grid_n = 288
c_tol = 1e-9
fp_tol = 1e-11
ball_guard = sup:4
";

#[test]
fn greens_test_reports_passing_checks() {
    let out = mfbubble(&["greens-test", "-n", "64"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["grid_n"], 64);
    assert!(v["symmetry"].as_f64().unwrap() < 1e-8);
    assert!((v["robin"].as_f64().unwrap() + 0.2086).abs() < 1e-3);
}

#[test]
fn greens_test_fails_an_impossible_tolerance() {
    let out = mfbubble(&["greens-test", "-n", "64", "--tol", "0"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn base_solve_reports_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.pfld");
    let out = mfbubble(&["base-solve", "-n", "64", "--dump-w", w.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!(v["residual"].as_f64().unwrap() < 1e-9);
    assert!(v["margin"].as_f64().unwrap() > 0.0);
    assert_eq!(fs::read(&w).unwrap().len(), 12 + 8 * 64 * 64);
}

#[test]
fn ansatz_dump_feeds_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let u = dir.path().join("u.pfld");
    let us = u.to_str().unwrap();
    let out = mfbubble(&["ansatz", "-n", "256", "-t", "0.2", "--dump-u", us]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let a = json(&out);
    let inner = a["mass_split"]["inner_mass"].as_f64().unwrap();
    let report = dir.path().join("d.json");
    let out = mfbubble(&["diagnose", "-t", "0.2", "-u", us, "-o", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let d: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(d["grid_n"], 256);
    assert!((d["rho_t"].as_f64().unwrap() - inner).abs() < 1e-9);
    assert!(d["outer_err"].is_null());
}

#[test]
fn solve_then_diagnose_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "p.cfg", POINT_CFG);
    let u = dir.path().join("u.pfld");
    let us = u.to_str().unwrap();
    let out = mfbubble(&["solve", "-c", &cfg, "--dump-u", us]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&out);
    assert!(s["residual"].as_f64().unwrap() < 1e-6);
    let q = s["q_star"].as_array().unwrap();
    let qs = format!("{},{}", q[0], q[1]);
    let out = mfbubble(&["diagnose", "-c", &cfg, "-u", us, "-q", &qs]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let d = json(&out);
    for key in ["rho_t", "outer_err", "lambda_pred"] {
        let a = s[key].as_f64().unwrap();
        let b = d[key].as_f64().unwrap();
        assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{key}: {a} vs {b}");
    }
    assert!(d["residual"].as_f64().unwrap() < 1e-6);
}

#[test]
fn sweep_writes_its_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.cfg", POINT_CFG);
    let out_dir = dir.path().join("out");
    let out = mfbubble(&[
        "sweep",
        "-c",
        &cfg,
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--dump-fields",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("t = 0.15"));
    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("0.15,288,ok,"));
    let fits = fs::read_to_string(out_dir.join("fits.csv")).unwrap();
    assert_eq!(fits.lines().count(), 6);
    let v: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(v["points"].as_array().unwrap().len(), 1);
    assert!(out_dir.join("u_t0.15.pfld").exists());
}

#[test]
fn under_resolved_grid_exits_with_4() {
    let out = mfbubble(&["ansatz", "-n", "64", "-t", "0.2"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("under-resolved"));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.cfg", "rho = 12pi\nbogus = 1\n");
    let out = mfbubble(&["base-solve", "-c", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2: unknown key `bogus`"));

    let forbidden = write(dir.path(), "rho.cfg", "rho = 16pi\n");
    let out = mfbubble(&["base-solve", "-n", "64", "-c", &forbidden]);
    assert_eq!(out.status.code(), Some(2));

    let out = mfbubble(&["base-solve", "-c", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = mfbubble(&["solve", "-q", "1,2,3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn corrupt_dump_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let u = write(dir.path(), "u.pfld", "not a field");
    let out = mfbubble(&["diagnose", "-t", "0.2", "-u", &u]);
    assert_eq!(out.status.code(), Some(2));
}
