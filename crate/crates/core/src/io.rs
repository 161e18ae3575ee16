//! Report and field I/O: JSON reports, CSV sweep tables, and binary field
//! dumps.
//!
//! A field dump is the 4-byte magic `PFLD`, the grid size `n` as a
//! little-endian `u32`, a reserved `u32` (zero), and then `n * n`
//! little-endian `f64` samples in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::SweepResult;
use crate::error::{Error, Result};
use crate::spectral::{Grid, PeriodicField};

const MAGIC: &[u8; 4] = b"PFLD";

pub fn write_field(w: &mut impl Write, f: &PeriodicField) -> Result<()> {
    let n = u32::try_from(f.grid().n()).map_err(|_| Error::Dump("grid too large".into()))?;
    w.write_all(MAGIC)?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    for v in f.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field(r: &mut impl Read) -> Result<PeriodicField> {
    let mut head = [0u8; 12];
    r.read_exact(&mut head)
        .map_err(|_| Error::Dump("truncated header".into()))?;
    if &head[..4] != MAGIC {
        return Err(Error::Dump("bad magic".into()));
    }
    let n = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes")) as usize;
    let grid = Grid::new(n)?;
    let mut buf = vec![0u8; 8 * grid.len()];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Dump(format!("expected {} samples", grid.len())))?;
    let vals = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    PeriodicField::new(grid, vals)
}

pub fn save_field(path: &Path, f: &PeriodicField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field(&mut w, f)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<PeriodicField> {
    read_field(&mut BufReader::new(File::open(path)?))
}

/// Pretty JSON with a trailing newline.
pub fn to_json(value: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct SweepRow {
    t: f64,
    grid_n: usize,
    status: &'static str,
    lambda_pred: Option<f64>,
    lambda_meas: Option<f64>,
    rho_t: Option<f64>,
    outer_err: Option<f64>,
    residual: Option<f64>,
}

#[derive(Serialize)]
struct FitRow<'a> {
    quantity: &'a str,
    exponent: Option<f64>,
    half_width: Option<f64>,
    points: Option<usize>,
    log_corrected: Option<bool>,
}

/// One row per `t`.
pub fn write_sweep_csv(w: impl Write, sweep: &SweepResult) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in &sweep.points {
        let r = p.report.as_ref();
        out.serialize(SweepRow {
            t: p.t,
            grid_n: p.grid_n,
            status: if r.is_some() { "ok" } else { "failed" },
            lambda_pred: r.map(|r| r.lambda_pred),
            lambda_meas: r.map(|r| r.lambda_meas),
            rho_t: r.map(|r| r.rho_t),
            outer_err: r.map(|r| r.outer_err),
            residual: r.map(|r| r.residual),
        })?;
    }
    out.flush()?;
    Ok(())
}

/// One row per fitted quantity.
pub fn write_fits_csv(w: impl Write, sweep: &SweepResult) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let f = &sweep.fits;
    for (name, fit) in [
        ("mean_ustar", &f.mean_ustar),
        ("ansatz_outer", &f.ansatz_outer),
        ("rho_gap", &f.rho_gap),
        ("outer_err", &f.outer_err),
        ("lambda_gap", &f.lambda_gap),
    ] {
        out.serialize(FitRow {
            quantity: name,
            exponent: fit.as_ref().map(|x| x.exponent),
            half_width: fit.as_ref().map(|x| x.half_width),
            points: fit.as_ref().map(|x| x.points),
            log_corrected: fit.as_ref().map(|x| x.log_corrected),
        })?;
    }
    out.flush()?;
    Ok(())
}
