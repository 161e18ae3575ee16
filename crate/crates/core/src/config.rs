//! `key = value` run configuration.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::base_state::{HStar, NewtonOptions, Vortex, WeightSpec, MARGIN_TOL};
use crate::bubble_ansatz::Geometry;
use crate::error::{Error, Result};
use crate::geom::{norm, Point};
use crate::reduction::{AdjustOptions, BallGuard, NormParams};

/// Parameters of a sweep over `t` (a single solve is a sweep of one).
#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub rho: f64,
    /// Strictly decreasing.
    pub t_list: Vec<f64>,
    /// One grid size for all `t`, or one per `t`.
    pub grid_n: Vec<usize>,
    pub geometry: Geometry,
    pub norm: NormParams,
    /// Exponent of the weight in the `eta` profile check.
    pub eps: f64,
    pub weight: WeightSpec,
    pub e_dir: Point,
    /// Starting point of the `q` adjustment.
    pub q0: Point,
    pub newton: NewtonOptions,
    pub margin_tol: f64,
    pub adjust: AdjustOptions,
    /// Largest accepted `|p_t| / t` for the measured maximum.
    pub max_peak_ratio: f64,
    /// Extra radii for the local-mass curve.
    pub sigma_radii: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let mut adjust = AdjustOptions {
            c_tol: 3e-13,
            ..AdjustOptions::default()
        };
        adjust.contraction.guard = BallGuard::Sup(2.0);
        adjust.contraction.fp_tol = 1e-13;
        SweepConfig {
            rho: 12.0 * PI,
            t_list: vec![0.15, 0.12, 0.10, 0.08],
            grid_n: vec![512, 512, 1024, 1024],
            geometry: Geometry::default(),
            norm: NormParams::default(),
            eps: 0.25,
            weight: WeightSpec {
                hstar: HStar::ExpCos {
                    c1: 0.3,
                    c2: 0.2,
                    s1: 0.1,
                    s2: 0.05,
                },
                vortices: Vec::new(),
            },
            e_dir: [1.0, 0.0],
            q0: [0.0, 0.0],
            newton: NewtonOptions::default(),
            margin_tol: MARGIN_TOL,
            adjust,
            max_peak_ratio: 5.0,
            sigma_radii: vec![0.05, 0.1, 0.2],
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Accepts a plain number or a multiple of pi such as `12pi` or `12*pi`.
pub fn parse_rho(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || cfg_err(format!("cannot parse rho `{s}`"));
    if let Some(head) = s.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*').trim();
        let k = if head.is_empty() {
            1.0
        } else {
            head.parse::<f64>().map_err(|_| bad())?
        };
        return Ok(k * PI);
    }
    s.parse::<f64>().map_err(|_| bad())
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| cfg_err(format!("{key}: cannot parse `{v}` as a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse::<usize>()
        .map_err(|_| cfg_err(format!("{key}: cannot parse `{v}` as an integer")))
}

fn parse_list<T>(key: &str, v: &str, f: impl Fn(&str, &str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',').map(|s| f(key, s)).collect()
}

fn parse_point(key: &str, v: &str) -> Result<Point> {
    match parse_list(key, v, parse_f64)?.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(cfg_err(format!("{key}: expected two numbers, got `{v}`"))),
    }
}

/// `x,y,order; x,y,order` or `none`.
fn parse_vortices(v: &str) -> Result<Vec<Vortex>> {
    if v.trim() == "none" || v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(';')
        .map(|item| {
            let parts: Vec<&str> = item.split(',').collect();
            match parts.as_slice() {
                [x, y, k] => Ok(Vortex {
                    at: [parse_f64("vortices", x)?, parse_f64("vortices", y)?],
                    order: parse_usize("vortices", k)? as u32,
                }),
                _ => Err(cfg_err(format!("vortices: expected `x,y,order`, got `{item}`"))),
            }
        })
        .collect()
}

fn parse_guard(v: &str) -> Result<BallGuard> {
    let v = v.trim();
    if v == "off" {
        return Ok(BallGuard::Off);
    }
    let (kind, f) = v
        .split_once(':')
        .ok_or_else(|| cfg_err(format!("ball_guard: expected `full:f`, `sup:f` or `off`, got `{v}`")))?;
    let f = parse_f64("ball_guard", f)?;
    match kind.trim() {
        "full" => Ok(BallGuard::Full(f)),
        "sup" => Ok(BallGuard::Sup(f)),
        _ => Err(cfg_err(format!("ball_guard: unknown kind `{kind}`"))),
    }
}

impl SweepConfig {
    /// Grid size used for the `k`-th value of `t`.
    pub fn grid_for(&self, k: usize) -> usize {
        if self.grid_n.len() == 1 {
            self.grid_n[0]
        } else {
            self.grid_n[k]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_list.is_empty() {
            return Err(cfg_err("t_list is empty"));
        }
        if self.t_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(cfg_err("t_list must be strictly decreasing"));
        }
        if self.t_list.iter().any(|&t| !(t > 0.0 && t < 0.5)) {
            return Err(cfg_err("every t must lie in (0, 1/2)"));
        }
        if self.grid_n.len() != 1 && self.grid_n.len() != self.t_list.len() {
            return Err(cfg_err(format!(
                "grid_n has {} entries; expected 1 or {}",
                self.grid_n.len(),
                self.t_list.len()
            )));
        }
        if (norm(self.e_dir) - 1.0).abs() > 1e-12 {
            return Err(cfg_err("e_dir must be a unit vector"));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(cfg_err("eps must lie in (0, 1/2)"));
        }
        self.norm.validate().map_err(|e| cfg_err(e.to_string()))?;
        self.weight.validate().map_err(|e| cfg_err(e.to_string()))?;
        Ok(())
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let c = &mut self.adjust.contraction;
        match key {
            "rho" => self.rho = parse_rho(v)?,
            "t" => self.t_list = vec![parse_f64(key, v)?],
            "t_list" => self.t_list = parse_list(key, v, parse_f64)?,
            "grid_n" => self.grid_n = parse_list(key, v, parse_usize)?,
            "R0" => self.geometry.big_r0 = parse_f64(key, v)?,
            "r0" => self.geometry.small_r0 = parse_f64(key, v)?,
            "p" => self.norm.p = parse_f64(key, v)?,
            "alpha" => self.norm.alpha = parse_f64(key, v)?,
            "eps" => self.eps = parse_f64(key, v)?,
            "hstar" => {
                self.weight.hstar =
                    HStar::from_str(v.trim()).map_err(|e| cfg_err(e.to_string()))?
            }
            "vortices" => self.weight.vortices = parse_vortices(v)?,
            "e_dir" => self.e_dir = parse_point(key, v)?,
            "q0" => self.q0 = parse_point(key, v)?,
            "newton_tol" => self.newton.tol = parse_f64(key, v)?,
            "newton_max_iter" => self.newton.max_iter = parse_usize(key, v)?,
            "margin_tol" => self.margin_tol = parse_f64(key, v)?,
            "fp_tol" => c.fp_tol = parse_f64(key, v)?,
            "max_fp_iter" => c.max_iter = parse_usize(key, v)?,
            "ball_guard" => c.guard = parse_guard(v)?,
            "linear_tol" => c.linear.residual_tol = parse_f64(key, v)?,
            "krylov_rtol" => c.linear.krylov_rtol = parse_f64(key, v)?,
            "krylov_max_iter" => c.linear.max_iter = parse_usize(key, v)?,
            "c_tol" => self.adjust.c_tol = parse_f64(key, v)?,
            "max_adjust_iter" => self.adjust.max_outer = parse_usize(key, v)?,
            "fd_fraction" => self.adjust.fd_fraction = parse_f64(key, v)?,
            "max_peak_ratio" => self.max_peak_ratio = parse_f64(key, v)?,
            "sigma_radii" => self.sigma_radii = parse_list(key, v, parse_f64)?,
            _ => return Err(cfg_err(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Reads `key = value` lines over the defaults; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SweepConfig::default();
        let mut seen = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| cfg_err(format!("line {}: expected `key = value`", lineno + 1)))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(cfg_err(format!("line {}: duplicate key `{k}`", lineno + 1)));
            }
            cfg.set(k, v).map_err(|e| {
                let msg = match e {
                    Error::Config(m) => m,
                    other => other.to_string(),
                };
                cfg_err(format!("line {}: {msg}", lineno + 1))
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// The config as `key = value` text that [`SweepConfig::parse`] reads back.
    pub fn render(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let c = &self.adjust.contraction;
        let guard = match c.guard {
            BallGuard::Full(f) => format!("full:{f}"),
            BallGuard::Sup(f) => format!("sup:{f}"),
            BallGuard::Off => "off".into(),
        };
        let vortices = if self.weight.vortices.is_empty() {
            "none".to_string()
        } else {
            self.weight
                .vortices
                .iter()
                .map(|v| format!("{},{},{}", v.at[0], v.at[1], v.order))
                .collect::<Vec<_>>()
                .join(";")
        };
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("rho", self.rho.to_string());
        kv("t_list", join(&self.t_list));
        kv(
            "grid_n",
            self.grid_n.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","),
        );
        kv("R0", self.geometry.big_r0.to_string());
        kv("r0", self.geometry.small_r0.to_string());
        kv("p", self.norm.p.to_string());
        kv("alpha", self.norm.alpha.to_string());
        kv("eps", self.eps.to_string());
        kv("hstar", self.weight.hstar.to_string());
        kv("vortices", vortices);
        kv("e_dir", join(&self.e_dir));
        kv("q0", join(&self.q0));
        kv("newton_tol", self.newton.tol.to_string());
        kv("newton_max_iter", self.newton.max_iter.to_string());
        kv("margin_tol", self.margin_tol.to_string());
        kv("fp_tol", c.fp_tol.to_string());
        kv("max_fp_iter", c.max_iter.to_string());
        kv("ball_guard", guard);
        kv("linear_tol", c.linear.residual_tol.to_string());
        kv("krylov_rtol", c.linear.krylov_rtol.to_string());
        kv("krylov_max_iter", c.linear.max_iter.to_string());
        kv("c_tol", self.adjust.c_tol.to_string());
        kv("max_adjust_iter", self.adjust.max_outer.to_string());
        kv("fd_fraction", self.adjust.fd_fraction.to_string());
        kv("max_peak_ratio", self.max_peak_ratio.to_string());
        kv("sigma_radii", join(&self.sigma_radii));
        s
    }
}
