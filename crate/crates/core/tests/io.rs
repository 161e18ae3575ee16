use std::f64::consts::PI;

use mfbubble::diagnostics::{PointOutcome, SweepFits, SweepResult};
use mfbubble::io::{
    load_field, read_field, save_field, to_json, write_field, write_fits_csv, write_sweep_csv,
};
use mfbubble::spectral::{Grid, PeriodicField};
use mfbubble::Error;

fn sample() -> PeriodicField {
    let grid = Grid::new(16).unwrap();
    PeriodicField::from_fn(grid, |x| (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos() + 1e-300)
}

#[test]
fn field_dump_round_trips_bit_for_bit() {
    let f = sample();
    let mut buf = Vec::new();
    write_field(&mut buf, &f).unwrap();
    assert_eq!(buf.len(), 12 + 8 * 256);
    assert_eq!(&buf[..4], b"PFLD");
    assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 16);
    let g = read_field(&mut buf.as_slice()).unwrap();
    assert_eq!(g.grid().n(), 16);
    for (a, b) in f.values().iter().zip(g.values()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn field_dump_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.pfld");
    let f = sample();
    save_field(&path, &f).unwrap();
    assert_eq!(load_field(&path).unwrap().values(), f.values());
}

#[test]
fn corrupt_dumps_are_rejected() {
    let mut buf = Vec::new();
    write_field(&mut buf, &sample()).unwrap();
    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(matches!(read_field(&mut bad.as_slice()), Err(Error::Dump(_))));
    let short = &buf[..buf.len() - 8];
    assert!(matches!(read_field(&mut &short[..]), Err(Error::Dump(_))));
    assert!(matches!(read_field(&mut &buf[..6]), Err(Error::Dump(_))));
}

#[test]
fn missing_dump_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let r = load_field(&dir.path().join("absent.pfld"));
    assert!(matches!(r, Err(Error::Io(_))));
}

fn failed_sweep() -> SweepResult {
    SweepResult {
        t: vec![0.1, 0.05],
        bases: vec![],
        points: vec![
            PointOutcome {
                t: 0.1,
                grid_n: 256,
                report: None,
                error: Some("under-resolved".into()),
            },
            PointOutcome {
                t: 0.05,
                grid_n: 256,
                report: None,
                error: Some("under-resolved".into()),
            },
        ],
        fits: SweepFits::default(),
    }
}

#[test]
fn sweep_csv_has_one_row_per_t() {
    let mut out = Vec::new();
    write_sweep_csv(&mut out, &failed_sweep()).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "t,grid_n,status,lambda_pred,lambda_meas,rho_t,outer_err,residual"
    );
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1], "0.1,256,failed,,,,,");
}

#[test]
fn fits_csv_lists_every_quantity() {
    let mut out = Vec::new();
    write_fits_csv(&mut out, &failed_sweep()).unwrap();
    let text = String::from_utf8(out).unwrap();
    let names: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["mean_ustar", "ansatz_outer", "rho_gap", "outer_err", "lambda_gap"]);
}

#[test]
fn json_ends_with_a_newline_and_parses_back() {
    let s = to_json(&failed_sweep()).unwrap();
    assert!(s.ends_with("}\n"));
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    assert_eq!(v["points"][1]["error"], "under-resolved");
    assert!(v["fits"]["outer_err"].is_null());
}
