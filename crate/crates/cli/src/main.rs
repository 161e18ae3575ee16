//! `mfbubble`: solves for bubbling solutions with a collapsing vortex pair and
//! reports blow-up diagnostics.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 solver failure,
//! 4 grid too coarse for the requested `t`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use mfbubble::bubble_ansatz::{
    assemble_ansatz, derive_params, outer_deviation, outer_deviation_beyond, AnsatzReport,
    Background,
};
use mfbubble::config::SweepConfig;
use mfbubble::diagnostics::{diagnose_field, run_sweep, solve_point};
use mfbubble::geom::Point;
use mfbubble::greens::{green_self_check, CollapsePair, GreenEvaluator};
use mfbubble::io::{load_field, save_field, to_json, write_fits_csv, write_sweep_csv};
use mfbubble::spectral::Grid;
use mfbubble::Error;

#[derive(Parser)]
#[command(name = "mfbubble", version, about = "Bubbling mean field solutions on the flat torus")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file; defaults are used for absent keys.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Grid size, overriding `grid_n`.
    #[arg(short, long)]
    n: Option<usize>,
    /// Write the JSON report here instead of standard output.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Point2 {
    /// Collapse parameter, overriding `t_list`.
    #[arg(short, long)]
    t: Option<f64>,
    /// Bubble location `x,y` in vortex-scale coordinates (default `q0`).
    #[arg(short, long, value_parser = parse_point)]
    q: Option<Point>,
}

#[derive(Subcommand)]
enum Command {
    /// Self-consistency of the Green's function on one grid.
    GreensTest {
        #[arg(short, long, default_value_t = 512)]
        n: usize,
        /// Tolerance on mean, symmetry and translation invariance.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Solves for the base state `w` and certifies its non-degeneracy.
    BaseSolve {
        #[command(flatten)]
        common: Common,
        /// Dump `w` in the PFLD format.
        #[arg(long)]
        dump_w: Option<PathBuf>,
    },
    /// Builds the approximate solution at one `(t, q)` without correcting it.
    Ansatz {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        at: Point2,
        /// Dump the mean-free ansatz `U`.
        #[arg(long)]
        dump_u: Option<PathBuf>,
    },
    /// Full solve with diagnostics at one `t`.
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        at: Point2,
        #[arg(long)]
        dump_u: Option<PathBuf>,
        #[arg(long)]
        dump_phi: Option<PathBuf>,
    },
    /// Solves every `t` of the config and fits decay rates.
    Sweep {
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Receives `sweep.json`, `sweep.csv`, `fits.csv` and optional dumps.
        #[arg(long, default_value = "sweep-out")]
        out_dir: PathBuf,
        /// Also dump `u` for each solved `t`.
        #[arg(long)]
        dump_fields: bool,
    },
    /// Diagnostics of a dumped field `u` at a given `(t, q)`.
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        at: Point2,
        /// PFLD dump of `u`; its size sets the grid.
        #[arg(short, long)]
        u: PathBuf,
    },
}

fn parse_point(s: &str) -> Result<Point, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(format!("expected `x,y`, got `{s}`")),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::InvalidWeight(_)
        | Error::RhoForbidden(_)
        | Error::InvalidGrid(_)
        | Error::OutOfRange(_)
        | Error::GridMismatch(..)
        | Error::Dump(_)
        | Error::Io(_) => 2,
        Error::UnderResolved(_) => 4,
        _ => 3,
    }
}

fn load_config(path: Option<&Path>) -> mfbubble::Result<SweepConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            SweepConfig::parse(&text)
        }
        None => Ok(SweepConfig::default()),
    }
}

/// Config with `--n` and `--t` applied; the point of interest is `t_list[0]`
/// on the grid `grid_for(0)`.
fn point_config(common: &Common, t: Option<f64>, n: Option<usize>) -> mfbubble::Result<SweepConfig> {
    let mut cfg = load_config(common.config.as_deref())?;
    if let Some(t) = t {
        cfg.t_list = vec![t];
        cfg.grid_n.truncate(1);
    }
    if let Some(n) = n.or(common.n) {
        cfg.grid_n = vec![n];
    }
    cfg.validate()?;
    Ok(cfg)
}

fn background(cfg: &SweepConfig) -> mfbubble::Result<Background> {
    let n = cfg.grid_for(0);
    info!("solving the base equation on a {n} x {n} grid");
    Background::solve(n, cfg.rho, cfg.weight.clone(), &cfg.newton, cfg.margin_tol)
}

fn emit(out: Option<&Path>, value: &impl Serialize) -> mfbubble::Result<()> {
    let text = to_json(value)?;
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

#[derive(Serialize)]
struct BaseReport {
    grid_n: usize,
    rho: f64,
    newton_steps: usize,
    residual: f64,
    history: Vec<f64>,
    margin: Option<f64>,
    mass: f64,
}

#[derive(Serialize)]
struct AnsatzOutput {
    #[serde(flatten)]
    report: AnsatzReport,
    outer_deviation: f64,
    outer_deviation_far: f64,
}

fn run(cli: Cli) -> mfbubble::Result<bool> {
    match cli.command {
        Command::GreensTest { n, tol } => {
            let g = GreenEvaluator::new(Grid::new(n)?);
            let c = green_self_check(&g);
            emit(None, &c)?;
            Ok(c.mean.abs() < tol
                && c.symmetry < tol
                && c.translation < tol
                && c.robin_spread < tol)
        }
        Command::BaseSolve { common, dump_w } => {
            let cfg = point_config(&common, None, None)?;
            let bg = background(&cfg)?;
            if let Some(p) = dump_w {
                save_field(&p, &bg.base.w)?;
            }
            emit(
                common.out.as_deref(),
                &BaseReport {
                    grid_n: bg.grid().n(),
                    rho: bg.rho(),
                    newton_steps: bg.base.newton_steps(),
                    residual: bg.base.residual,
                    history: bg.base.history.clone(),
                    margin: bg.base.margin,
                    mass: bg.mass(),
                },
            )?;
            Ok(true)
        }
        Command::Ansatz { common, at, dump_u } => {
            let cfg = point_config(&common, at.t, None)?;
            let bg = background(&cfg)?;
            let t = cfg.t_list[0];
            let pair = CollapsePair::new(t, cfg.e_dir)?;
            let p = derive_params(&bg, &pair, at.q.unwrap_or(cfg.q0), &cfg.geometry)?;
            let ans = assemble_ansatz(&p, &bg, &pair)?;
            if let Some(path) = dump_u {
                save_field(&path, &ans.u)?;
            }
            emit(
                common.out.as_deref(),
                &AnsatzOutput {
                    report: AnsatzReport::new(&ans, &bg),
                    outer_deviation: outer_deviation(&ans, &bg),
                    outer_deviation_far: outer_deviation_beyond(&ans, &bg, 2.0 * p.core_radius()),
                },
            )?;
            Ok(true)
        }
        Command::Solve {
            common,
            at,
            dump_u,
            dump_phi,
        } => {
            let mut cfg = point_config(&common, at.t, None)?;
            if let Some(q) = at.q {
                cfg.q0 = q;
            }
            let bg = background(&cfg)?;
            let (report, fields) = solve_point(&bg, cfg.t_list[0], &cfg)?;
            if let Some(p) = dump_u {
                save_field(&p, &fields.u)?;
            }
            if let Some(p) = dump_phi {
                save_field(&p, &fields.phi)?;
            }
            emit(common.out.as_deref(), &report)?;
            Ok(true)
        }
        Command::Sweep {
            config,
            out_dir,
            dump_fields,
        } => {
            let cfg = load_config(config.as_deref())?;
            fs::create_dir_all(&out_dir)?;
            let mut dump_err = None;
            let sweep = run_sweep(&cfg, |t, f| {
                if dump_fields && dump_err.is_none() {
                    let path = out_dir.join(format!("u_t{t}.pfld"));
                    dump_err = save_field(&path, &f.u).err();
                }
            })?;
            if let Some(e) = dump_err {
                return Err(e);
            }
            emit(Some(&out_dir.join("sweep.json")), &sweep)?;
            write_sweep_csv(fs::File::create(out_dir.join("sweep.csv"))?, &sweep)?;
            write_fits_csv(fs::File::create(out_dir.join("fits.csv"))?, &sweep)?;
            let mut stdout = std::io::stdout();
            for p in &sweep.points {
                match (&p.report, &p.error) {
                    (Some(r), _) => writeln!(
                        stdout,
                        "t = {:<6} n = {:<5} lambda_meas {:>9.4} rho_t {:>8.4} outer_err {:.3e} residual {:.2e}",
                        p.t, p.grid_n, r.lambda_meas, r.rho_t, r.outer_err, r.residual
                    )?,
                    (None, e) => writeln!(
                        stdout,
                        "t = {:<6} n = {:<5} failed: {}",
                        p.t,
                        p.grid_n,
                        e.as_deref().unwrap_or("unknown")
                    )?,
                }
            }
            Ok(sweep.successes() == sweep.points.len())
        }
        Command::Diagnose { common, at, u } => {
            let field = load_field(&u)?;
            let cfg = point_config(&common, at.t, Some(field.grid().n()))?;
            let bg = background(&cfg)?;
            let report = diagnose_field(&bg, cfg.t_list[0], at.q.unwrap_or(cfg.q0), &cfg, field)?;
            emit(common.out.as_deref(), &report)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
