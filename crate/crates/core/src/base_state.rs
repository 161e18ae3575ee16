//! The weight `h` and the non-degenerate solution `w` of
//! `Delta w + (rho - 8 pi)(h e^w / integrate(h e^w) - 1) = 0`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::elliptic::{DensityOperator, SaddleSolver, SolveOptions};
use crate::error::{Error, Result};
use crate::geom::{torus_dist, Point};
use crate::greens::GreenEvaluator;
use crate::spectral::{PeriodicField, SpectralField};

/// Closed-form positive factor `h_*`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum HStar {
    Const(f64),
    /// `exp(c1 cos 2pi(x1 - s1) + c2 cos 2pi(x2 - s2))`.
    ExpCos { c1: f64, c2: f64, s1: f64, s2: f64 },
}

impl HStar {
    pub fn eval(&self, x: Point) -> f64 {
        match *self {
            HStar::Const(c) => c,
            HStar::ExpCos { c1, c2, s1, s2 } => {
                (c1 * (2.0 * PI * (x[0] - s1)).cos() + c2 * (2.0 * PI * (x[1] - s2)).cos()).exp()
            }
        }
    }

    /// Even in both coordinates about the origin.
    pub fn is_even(&self) -> bool {
        match *self {
            HStar::Const(_) => true,
            HStar::ExpCos { c1, c2, s1, s2 } => {
                let even = |c: f64, s: f64| c == 0.0 || (2.0 * s).fract() == 0.0;
                even(c1, s1) && even(c2, s2)
            }
        }
    }
}

impl fmt::Display for HStar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HStar::Const(c) => write!(f, "const:{c}"),
            HStar::ExpCos { c1, c2, s1, s2 } => write!(f, "expcos:{c1},{c2},{s1},{s2}"),
        }
    }
}

impl FromStr for HStar {
    type Err = Error;

    /// Accepts `const:c` or `expcos:c1,c2` or `expcos:c1,c2,s1,s2`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidWeight(format!("cannot parse hstar `{s}`"));
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        match (kind.trim(), nums.as_slice()) {
            ("const", [c]) => Ok(HStar::Const(*c)),
            ("expcos", [c1, c2]) => Ok(HStar::ExpCos {
                c1: *c1,
                c2: *c2,
                s1: 0.0,
                s2: 0.0,
            }),
            ("expcos", [c1, c2, s1, s2]) => Ok(HStar::ExpCos {
                c1: *c1,
                c2: *c2,
                s1: *s1,
                s2: *s2,
            }),
            _ => Err(bad()),
        }
    }
}

/// Extra vortex of integer order at a point other than the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vortex {
    pub at: Point,
    pub order: u32,
}

/// `h = h_* exp(-4 pi sum_i alpha_i G(., q_i))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub hstar: HStar,
    pub vortices: Vec<Vortex>,
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec {
            hstar: HStar::Const(1.0),
            vortices: Vec::new(),
        }
    }
}

impl WeightSpec {
    pub fn validate(&self) -> Result<()> {
        if let HStar::Const(c) = self.hstar {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidWeight(format!("hstar constant {c} must be positive")));
            }
        }
        if let HStar::ExpCos { c1, c2, s1, s2 } = self.hstar {
            if ![c1, c2, s1, s2].iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidWeight("non-finite hstar parameter".into()));
            }
        }
        for v in &self.vortices {
            if v.order == 0 {
                return Err(Error::InvalidWeight("vortex order must be positive".into()));
            }
            if torus_dist(v.at, [0.0, 0.0]) < 1e-12 {
                return Err(Error::InvalidWeight("vortex at the origin".into()));
            }
        }
        Ok(())
    }

    /// Pointwise `h(x)`.
    pub fn eval(&self, green: &GreenEvaluator, x: Point) -> f64 {
        let mut h = self.hstar.eval(x);
        for v in &self.vortices {
            h *= green.vortex_factor(x, v.at, v.order as f64);
        }
        h
    }

    /// True when `h(-x1, x2) = h(x1, x2)` and `h(x1, -x2) = h(x1, x2)`.
    pub fn is_even(&self) -> bool {
        self.hstar.is_even() && self.vortices.is_empty()
    }
}

/// Samples `h` on the grid of `green`.
pub fn assemble_h(spec: &WeightSpec, green: &GreenEvaluator) -> Result<PeriodicField> {
    spec.validate()?;
    let mut h = PeriodicField::from_fn(green.grid(), |x| spec.hstar.eval(x));
    for v in &spec.vortices {
        h = h.mul(&green.vortex_factor_field(v.at, v.order as f64));
    }
    Ok(h)
}

/// Default threshold below which a base solution is treated as degenerate.
pub const MARGIN_TOL: f64 = 1e-2;

/// Newton controls for [`solve_base`].
#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-11,
            max_iter: 50,
        }
    }
}

/// Converged mean-zero solution `w`.
#[derive(Clone, Debug)]
pub struct BaseSolution {
    pub w: PeriodicField,
    pub rho: f64,
    /// Final max-norm of the residual.
    pub residual: f64,
    /// Residual before each Newton step and after the last.
    pub history: Vec<f64>,
    /// Non-degeneracy margin, once computed.
    pub margin: Option<f64>,
}

impl BaseSolution {
    pub fn newton_steps(&self) -> usize {
        self.history.len().saturating_sub(1)
    }

    /// Computes and stores the margin; fails with `Degenerate` below `margin_tol`.
    pub fn certify(&mut self, h: &PeriodicField, margin_tol: f64) -> Result<f64> {
        let m = nondegeneracy_margin(self, h)?;
        self.margin = Some(m);
        if m < margin_tol {
            return Err(Error::Degenerate(m));
        }
        Ok(m)
    }

    /// `integrate(h e^w)`.
    pub fn mass(&self, h: &PeriodicField) -> f64 {
        h.zip_map(&self.w, |a, b| a * b.exp()).mean()
    }
}

/// Rejects `rho <= 8 pi` and `rho` within 1e-9 of `8 pi N`.
pub fn check_rho(rho: f64) -> Result<()> {
    let k = rho / (8.0 * PI);
    if (k - k.round()).abs() < 1e-9 {
        return Err(Error::RhoForbidden(rho));
    }
    if rho <= 8.0 * PI || !rho.is_finite() {
        return Err(Error::OutOfRange(format!("rho = {rho} must exceed 8 pi")));
    }
    Ok(())
}

/// `F(w) = Delta w + (rho - 8 pi)(h e^w / integrate(h e^w) - 1)`.
pub fn base_residual(rho: f64, h: &PeriodicField, w: &PeriodicField) -> PeriodicField {
    let lap = SpectralField::forward(w).laplacian().inverse();
    let shift = w.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dens = h.zip_map(w, |a, b| a * (b - shift).exp());
    let mass = dens.mean();
    let k = rho - 8.0 * PI;
    lap.zip_map(&dens, |l, d| l + k * (d / mass - 1.0))
}

/// Linearization of [`base_residual`] at `w`.
pub fn base_jacobian(rho: f64, h: &PeriodicField, w: &PeriodicField) -> DensityOperator {
    let shift = w.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    DensityOperator::new(rho - 8.0 * PI, &h.zip_map(w, |a, b| a * (b - shift).exp()))
}

pub use crate::spectral::laplacian_roundoff as roundoff_floor;

/// Damped Newton iteration on mean-zero fields.
///
/// A residual that stops decreasing below [`roundoff_floor`] is accepted even
/// when it sits above `opts.tol`, since fine grids cannot resolve further.
pub fn solve_base(
    rho: f64,
    h: &PeriodicField,
    w0: &PeriodicField,
    opts: &NewtonOptions,
) -> Result<BaseSolution> {
    check_rho(rho)?;
    let mut w = w0.mean_free();
    let mut res = base_residual(rho, h, &w).max_abs();
    let mut history = vec![res];
    for _ in 0..opts.max_iter {
        if res < opts.tol {
            break;
        }
        let jac = base_jacobian(rho, h, &w);
        let f = base_residual(rho, h, &w);
        let solver = SaddleSolver::<0>::new(&jac, [])?;
        let lin = SolveOptions {
            residual_tol: (1e-4 * res).max(1e-13).max(0.1 * roundoff_floor(&w)),
            krylov_rtol: 1e-12,
            ..SolveOptions::default()
        };
        let step = solver.solve(&f.scale(-1.0), None, &lin)?.phi;
        let mut lambda = 1.0;
        let mut stalled = false;
        loop {
            let mut trial = w.clone();
            trial.axpy(lambda, &step);
            let trial = trial.mean_free();
            let tres = base_residual(rho, h, &trial).max_abs();
            if tres < res {
                w = trial;
                res = tres;
                break;
            }
            if res < roundoff_floor(&w) {
                stalled = true;
                break;
            }
            if lambda < 1e-3 {
                w = trial;
                res = tres;
                break;
            }
            lambda *= 0.5;
        }
        if stalled {
            break;
        }
        history.push(res);
    }
    if res >= opts.tol.max(roundoff_floor(&w)) {
        return Err(Error::NoConvergence {
            iters: history.len() - 1,
            residual: res,
        });
    }
    Ok(BaseSolution {
        w,
        rho,
        residual: res,
        history,
        margin: None,
    })
}

fn probe_field(grid: crate::spectral::Grid) -> PeriodicField {
    PeriodicField::from_fn(grid, |x| {
        let a = 2.0 * PI * x[0];
        let b = 2.0 * PI * x[1];
        a.cos() + 0.7 * b.sin() + 0.3 * (a + b).cos() + 0.2 * (2.0 * a - b).sin()
            + 0.1 * (3.0 * b).cos()
    })
    .mean_free()
}

/// Smallest `|eigenvalue|` of the linearized base operator on mean-zero
/// fields, by inverse iteration in the grid inner product.
pub fn nondegeneracy_margin(sol: &BaseSolution, h: &PeriodicField) -> Result<f64> {
    let jac = base_jacobian(sol.rho, h, &sol.w);
    let solver = SaddleSolver::<0>::new(&jac, [])?;
    let mut x = probe_field(h.grid());
    let mut mu_prev = f64::NAN;
    let mut mu = f64::NAN;
    for _ in 0..60 {
        let norm = x.dot(&x).sqrt();
        x = x.scale(1.0 / norm);
        let jx = jac.apply(&x);
        mu = x.dot(&jx);
        if (mu - mu_prev).abs() <= 1e-11 * mu.abs().max(1e-300) {
            break;
        }
        mu_prev = mu;
        let (y, _) = solver.solve_single_pass(&x, 1e-12, 800);
        if y.max_abs() == 0.0 || !y.values().iter().all(|v| v.is_finite()) {
            return Ok(0.0);
        }
        x = y;
    }
    Ok(mu.abs())
}
