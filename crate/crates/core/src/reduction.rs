//! Finite-dimensional reduction around the ansatz: cutoff and approximate
//! kernels, the weighted norms, the projection onto the complement of the
//! translation kernels, the bordered linear solve, the fixed-point iteration
//! for the correction `phi`, and the adjustment of `q` that kills the
//! multipliers.

use std::f64::consts::PI;

use serde::Serialize;

use crate::bubble_ansatz::{
    assemble_ansatz, derive_params, weighted_exp, Ansatz, Background, BubbleParams, Geometry,
};
use crate::elliptic::{DensityOperator, SaddleSolver, SolveOptions};
use crate::error::{Error, Result};
use crate::geom::{norm, Point};
use crate::greens::{CollapsePair, Window};
use crate::liouville::{kernel_value, KernelIndex};
use crate::quad;
use crate::spectral::{laplacian, PeriodicField};

/// Exponents of the weighted spaces.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct NormParams {
    pub p: f64,
    pub alpha: f64,
}

impl Default for NormParams {
    fn default() -> Self {
        NormParams {
            p: 1.5,
            alpha: 0.25,
        }
    }
}

impl NormParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::OutOfRange(format!("alpha = {} not in (0, 1/2)", self.alpha)));
        }
        if !(self.p > 1.0 && self.p <= 2.0) {
            return Err(Error::OutOfRange(format!("p = {} not in (1, 2]", self.p)));
        }
        Ok(())
    }
}

/// Grid point inside the gluing disc with its stretched coordinate.
#[derive(Clone, Copy, Debug)]
struct CorePoint {
    idx: usize,
    z: Point,
}

/// Cutoff, approximate kernels and quadrature data for one `(t, q)`.
#[derive(Clone, Debug)]
pub struct ReductionFrame {
    pub params: BubbleParams,
    pub norm: NormParams,
    pub cutoff: Window,
    pub chi: PeriodicField,
    pub hat_y: [PeriodicField; 2],
    /// Approximate kernels with the (quadrature-level) mean removed.
    pub z: [PeriodicField; 2],
    /// Grid integral of each kernel before its mean was removed.
    pub z_mean_defect: [f64; 2],
    /// `gram[i][j] = integrate(Z_j hatY_i)`.
    pub gram: [[f64; 2]; 2],
    /// `integrate(|grad(chi Y_i)|^2 + 8 chi^3 Y_i^2 / (1+|z|^2)^2)` by radial quadrature.
    pub energy: [f64; 2],
    core: Vec<CorePoint>,
    outer: Vec<usize>,
}

/// `integrate(|grad(chi Y_1)|^2 + 8 chi^3 Y_1^2 / (1+|z|^2)^2) dz` for the
/// cutoff `chi(|z|)` on `[gamma/2, gamma]`, reduced to a radial integral.
pub fn kernel_energy_radial(gamma: f64) -> f64 {
    let w = Window {
        inner: gamma / 2.0,
        outer: gamma,
    };
    let g = |r: f64| {
        let [c, c1, _] = w.eval(r);
        let s = 1.0 + r * r;
        let f = r / s;
        let f1 = (1.0 - r * r) / (s * s);
        let gp = c1 * f + c * f1;
        let over_r = c / s;
        PI * r * (gp * gp + over_r * over_r + 8.0 * c * c * c * f * f / (s * s))
    };
    let mut breaks = quad::geometric_breaks(0.25, gamma / 2.0);
    breaks.extend((1..=8).map(|k| gamma / 2.0 * (1.0 + k as f64 / 8.0)));
    quad::panels_tanh_sinh(g, &breaks, 1e-14).value
}

impl ReductionFrame {
    pub fn build(ans: &Ansatz, bg: &Background, norm_params: NormParams) -> Result<Self> {
        norm_params.validate()?;
        let p = ans.params;
        crate::bubble_ansatz::check_resolution(&p, bg.grid())?;
        let grid = bg.grid();
        let tq = p.center();
        let rc = p.core_radius();
        let lam = p.big_lambda;
        let cutoff = Window {
            inner: rc / 2.0,
            outer: rc,
        };
        let n2 = grid.len();
        let mut chi = vec![0.0; n2];
        let mut hat_y = [vec![0.0; n2], vec![0.0; n2]];
        let mut z = [vec![0.0; n2], vec![0.0; n2]];
        let mut core = Vec::new();
        let mut outer = Vec::new();
        for idx in 0..n2 {
            let x = grid.node_at(idx);
            let d = crate::geom::torus_disp(x, tq);
            let r = norm(d);
            if r >= rc / 2.0 {
                outer.push(idx);
            }
            if r >= rc {
                continue;
            }
            let zz = [lam * d[0], lam * d[1]];
            core.push(CorePoint { idx, z: zz });
            let [c, c1, c2] = cutoff.eval(r);
            let s = lam * lam * r * r;
            let one = 1.0 + s;
            let lap_chi = if r > 0.0 { c2 + c1 / r } else { 0.0 };
            chi[idx] = c;
            for i in 0..2 {
                let y = kernel_value(KernelIndex::new(i as u8 + 1).expect("index"), zz);
                hat_y[i][idx] = c * y;
                let grad_term = if r > 0.0 {
                    // chi'(r) in z units is c1 / lam; z_i / |z| = d_i / r.
                    2.0 * (c1 / lam) * (d[i] / r) * (1.0 - s) / (one * one)
                } else {
                    0.0
                };
                z[i][idx] = lam * lam
                    * (-y * lap_chi / (lam * lam) - grad_term
                        + 8.0 * c * (1.0 + c) * y / (one * one));
            }
        }
        let chi = PeriodicField::new(grid, chi)?;
        let hat_y = hat_y.map(|v| PeriodicField::new(grid, v).expect("finite"));
        let raw = z.map(|v| PeriodicField::new(grid, v).expect("finite"));
        let z_mean_defect = [raw[0].mean(), raw[1].mean()];
        let z = raw.map(|f| f.mean_free());
        let gram = [
            [hat_y[0].dot(&z[0]), hat_y[0].dot(&z[1])],
            [hat_y[1].dot(&z[0]), hat_y[1].dot(&z[1])],
        ];
        let e = kernel_energy_radial(p.gamma);
        Ok(ReductionFrame {
            params: p,
            norm: norm_params,
            cutoff,
            chi,
            hat_y,
            z,
            z_mean_defect,
            gram,
            energy: [e, e],
            core,
            outer,
        })
    }

    /// Number of grid points in the gluing disc.
    pub fn core_points(&self) -> usize {
        self.core.len()
    }

    fn cell(&self) -> f64 {
        let h = self.chi.grid().spacing();
        h * h
    }

    /// `integrate_{B_Gamma} f(z, value at grid point) dz` over core points.
    fn core_integral(&self, f: impl Fn(Point, usize) -> f64) -> f64 {
        let jac = self.params.big_lambda * self.params.big_lambda * self.cell();
        self.core.iter().map(|c| f(c.z, c.idx)).sum::<f64>() * jac
    }

    fn outer_lp(&self, f: &PeriodicField) -> f64 {
        let p = self.norm.p;
        let s: f64 = self.outer.iter().map(|&i| f.values()[i].abs().powf(p)).sum();
        (s * self.cell()).powf(1.0 / p)
    }

    fn weight_pow(&self, z: Point) -> f64 {
        (1.0 + norm(z)).powf(2.0 + self.norm.alpha)
    }

    /// The four terms of the `X` norm.
    pub fn norm_x_parts(&self, phi: &PeriodicField) -> Result<XNormParts> {
        check_mean(phi)?;
        let lap = laplacian(phi);
        let ll = self.params.big_lambda * self.params.big_lambda;
        let inner_lap = self
            .core_integral(|z, i| (lap.values()[i] / ll).powi(2) * self.weight_pow(z))
            .sqrt();
        let alpha = self.norm.alpha;
        let inner_val = self
            .core_integral(|z, i| {
                (phi.values()[i] * crate::liouville::weight_rho(z, alpha)).powi(2)
            })
            .sqrt();
        Ok(XNormParts {
            inner_lap,
            inner_val,
            outer_lap: self.outer_lp(&lap),
            outer_val: self.outer_lp(phi),
        })
    }

    /// The `X` norm of a mean-zero field.
    pub fn norm_x(&self, phi: &PeriodicField) -> Result<f64> {
        Ok(self.norm_x_parts(phi)?.total())
    }

    /// The two terms of the `Y` norm.
    pub fn norm_y_parts(&self, g: &PeriodicField) -> Result<[f64; 2]> {
        check_mean(g)?;
        let p = &self.params;
        let s = p.t * p.t * (-p.lambda).exp();
        let inner = self
            .core_integral(|z, i| (s * g.values()[i]).powi(2) * self.weight_pow(z))
            .sqrt();
        Ok([inner, self.outer_lp(g)])
    }

    /// The `Y` norm of a mean-zero field.
    pub fn norm_y(&self, g: &PeriodicField) -> Result<f64> {
        let [a, b] = self.norm_y_parts(g)?;
        Ok(a + b)
    }

    /// `integrate_{B_Gamma} rho(z)^2 dz` on the core points.
    pub fn weight_mass(&self) -> f64 {
        let alpha = self.norm.alpha;
        self.core_integral(|z, _| crate::liouville::weight_rho(z, alpha).powi(2))
    }

    /// `Q g = g - sum c_i Z_i` with `integrate(Q g hatY_i) = 0`.
    pub fn project(&self, g: &PeriodicField) -> (PeriodicField, [f64; 2]) {
        let b = [g.dot(&self.hat_y[0]), g.dot(&self.hat_y[1])];
        let c = solve2(&self.gram, b);
        let mut out = g.clone();
        out.axpy(-c[0], &self.z[0]);
        out.axpy(-c[1], &self.z[1]);
        (out, c)
    }
}

/// Terms of the `X` norm: the weighted inner Laplacian and value, and the
/// outer `L^p` norms of the Laplacian and value.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct XNormParts {
    pub inner_lap: f64,
    pub inner_val: f64,
    pub outer_lap: f64,
    pub outer_val: f64,
}

impl XNormParts {
    pub fn total(&self) -> f64 {
        self.inner_lap + self.inner_val + self.outer_lap + self.outer_val
    }
}

fn check_mean(f: &PeriodicField) -> Result<()> {
    let m = f.mean();
    let tol = 1e-8 * (1.0 + f.max_abs());
    if m.abs() > tol {
        return Err(Error::NonZeroMean { mean: m, tol });
    }
    Ok(())
}

fn solve2(m: &[[f64; 2]; 2], b: [f64; 2]) -> [f64; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [
        (b[0] * m[1][1] - b[1] * m[0][1]) / det,
        (m[0][0] * b[1] - m[1][0] * b[0]) / det,
    ]
}

/// Ansatz, frame and linearization for one `(t, q)`.
pub struct ReducedProblem<'a> {
    pub bg: &'a Background,
    pub pair: CollapsePair,
    pub ansatz: Ansatz,
    pub frame: ReductionFrame,
    pub op: DensityOperator,
    lap_u: PeriodicField,
}

impl<'a> ReducedProblem<'a> {
    pub fn new(
        bg: &'a Background,
        pair: &CollapsePair,
        q: Point,
        geom: &Geometry,
        norm_params: NormParams,
    ) -> Result<Self> {
        let params = derive_params(bg, pair, q, geom)?;
        let ansatz = assemble_ansatz(&params, bg, pair)?;
        Self::from_ansatz(bg, pair, ansatz, norm_params)
    }

    pub fn from_ansatz(
        bg: &'a Background,
        pair: &CollapsePair,
        ansatz: Ansatz,
        norm_params: NormParams,
    ) -> Result<Self> {
        let frame = ReductionFrame::build(&ansatz, bg, norm_params)?;
        let op = DensityOperator::new(bg.rho(), &density_weight(bg, &ansatz, None));
        let lap_u = laplacian(&ansatz.u);
        Ok(ReducedProblem {
            bg,
            pair: *pair,
            ansatz,
            frame,
            op,
            lap_u,
        })
    }

    pub fn params(&self) -> &BubbleParams {
        &self.ansatz.params
    }

    /// `L phi`.
    pub fn apply_l(&self, phi: &PeriodicField) -> PeriodicField {
        self.op.apply(phi)
    }

    /// Nonlinear remainder `g(phi)`, so that `L phi = g(phi)` is the full equation.
    pub fn residual_g(&self, phi: &PeriodicField) -> PeriodicField {
        let rho = self.bg.rho();
        let f = density_weight(self.bg, &self.ansatz, Some(phi));
        let mass = f.mean();
        let pot = self.op.potential(phi);
        let vals = self
            .lap_u
            .values()
            .iter()
            .zip(f.values())
            .zip(pot.values())
            .map(|((l, fv), pv)| -l + rho - rho * fv / mass + pv)
            .collect();
        PeriodicField::new(phi.grid(), vals).expect("finite residual")
    }

    /// Residual of the full equation at `u = U + phi`.
    pub fn full_residual(&self, phi: &PeriodicField) -> PeriodicField {
        let u = self.ansatz.u.add(phi);
        full_equation_residual(self.bg, &self.ansatz.singular, &u)
    }

    /// Bordered solve `L phi = g + sum c_i Z_i`, `integrate(phi Z_i) = 0`.
    pub fn solve_reduced(
        &self,
        g: &PeriodicField,
        guess: Option<(&PeriodicField, [f64; 2])>,
        opts: &SolveOptions,
    ) -> Result<ReducedSolveResult> {
        let solver = SaddleSolver::<2>::new(&self.op, self.frame.z.clone())?;
        let sol = solver.solve(g, guess, opts)?;
        let x_norm = self.frame.norm_x(&sol.phi)?;
        let y_norm = self.frame.norm_y(g)?;
        let lt = self.params().t.ln().abs();
        let bound_ratio = (sol.phi.max_abs() + x_norm) / (lt * y_norm);
        Ok(ReducedSolveResult {
            phi: sol.phi,
            c: sol.c,
            x_norm,
            y_norm,
            linear_iters: sol.iterations,
            bound_ratio,
            residual: sol.residual,
            constraint: sol.constraint,
        })
    }
}

/// `h e^{U + phi} e^{-G_t}` up to a constant factor.
fn density_weight(bg: &Background, ans: &Ansatz, phi: Option<&PeriodicField>) -> PeriodicField {
    let v = match phi {
        Some(p) => ans.u.add(p),
        None => ans.u.clone(),
    };
    let top = v.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    weighted_exp(&bg.h, &ans.singular, &v.add_constant(-top))
}

/// `Delta u + rho (h e^{u - G_t} / integrate(h e^{u - G_t}) - 1)`.
pub fn full_equation_residual(
    bg: &Background,
    singular: &PeriodicField,
    u: &PeriodicField,
) -> PeriodicField {
    let rho = bg.rho();
    let top = u.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let f = weighted_exp(&bg.h, singular, &u.add_constant(-top));
    let mass = f.mean();
    laplacian(u).zip_map(&f, |l, fv| l + rho * (fv / mass - 1.0))
}

#[derive(Clone, Debug)]
pub struct ReducedSolveResult {
    pub phi: PeriodicField,
    pub c: [f64; 2],
    pub x_norm: f64,
    pub y_norm: f64,
    pub linear_iters: usize,
    /// `(|phi|_inf + |phi|_X) / (|ln t| |g|_Y)`.
    pub bound_ratio: f64,
    pub residual: f64,
    pub constraint: f64,
}

/// Which size of the iterate aborts the fixed-point iteration, as a multiple
/// of the ball radius `t^{2/p} |ln t|^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum BallGuard {
    /// `|phi|_inf + |phi|_X`.
    Full(f64),
    /// `|phi|_inf` alone.
    Sup(f64),
    Off,
}

/// Controls of the fixed-point iteration.
#[derive(Clone, Copy, Debug)]
pub struct ContractionOptions {
    pub fp_tol: f64,
    pub max_iter: usize,
    pub guard: BallGuard,
    pub linear: SolveOptions,
}

impl Default for ContractionOptions {
    fn default() -> Self {
        ContractionOptions {
            fp_tol: 1e-10,
            max_iter: 40,
            guard: BallGuard::Full(2.0),
            linear: SolveOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionStep {
    /// `|phi_{k+1} - phi_k|_inf`.
    pub diff: f64,
    pub phi_sup: f64,
    pub linear_iters: usize,
}

#[derive(Clone, Debug)]
pub struct ContractionResult {
    pub phi: PeriodicField,
    /// Multipliers of the unprojected equation `L phi = g(phi) + sum c_i Z_i`.
    pub c: [f64; 2],
    pub history: Vec<ContractionStep>,
    pub x_norm: f64,
    pub ball_radius: f64,
    pub last_linear: ReducedSolveResult,
}

impl ContractionResult {
    /// Ratios of successive differences.
    pub fn factors(&self) -> Vec<f64> {
        self.history
            .windows(2)
            .map(|w| w[1].diff / w[0].diff)
            .collect()
    }

    /// Largest ratio of successive differences while they are above `floor`.
    pub fn contraction_factor(&self, floor: f64) -> f64 {
        Self::factor_of(&self.history, floor)
    }

    /// [`Self::contraction_factor`] of a bare history.
    pub fn factor_of(history: &[ContractionStep], floor: f64) -> f64 {
        history
            .windows(2)
            .filter(|w| w[1].diff > floor)
            .map(|w| w[1].diff / w[0].diff)
            .fold(0.0, f64::max)
    }

    pub fn in_ball(&self) -> bool {
        self.phi.max_abs() + self.x_norm <= self.ball_radius
    }
}

/// `t^{2/p} |ln t|^2`.
pub fn ball_radius(t: f64, p: f64) -> f64 {
    t.powf(2.0 / p) * t.ln().powi(2)
}

/// Fixed-point iteration `phi <- (Q L)^{-1} Q g(phi)` from `start` (zero if `None`).
pub fn contraction_solve(
    prob: &ReducedProblem<'_>,
    start: Option<&PeriodicField>,
    opts: &ContractionOptions,
) -> Result<ContractionResult> {
    let grid = prob.bg.grid();
    let t = prob.params().t;
    let radius = ball_radius(t, prob.frame.norm.p);
    let mut phi = start
        .map(|s| s.mean_free())
        .unwrap_or_else(|| PeriodicField::zeros(grid));
    let mut history = Vec::new();
    let mut guess_c = [0.0; 2];
    for iter in 0..opts.max_iter {
        let g = prob.residual_g(&phi);
        let (gp, b) = prob.frame.project(&g);
        let sol = prob.solve_reduced(&gp, Some((&phi, guess_c)), &opts.linear)?;
        let diff = sol.phi.max_abs_diff(&phi);
        let sup = sol.phi.max_abs();
        history.push(ContractionStep {
            diff,
            phi_sup: sup,
            linear_iters: sol.linear_iters,
        });
        let (size, factor, what) = match opts.guard {
            BallGuard::Full(f) => (sup + sol.x_norm, f, "|phi|_inf + |phi|_X"),
            BallGuard::Sup(f) => (sup, f, "|phi|_inf"),
            BallGuard::Off => (sup, f64::INFINITY, "|phi|_inf"),
        };
        if !(size <= factor * radius) {
            return Err(Error::ContractionDiverged {
                iter,
                reason: format!(
                    "{what} = {size:.3e} exceeds {factor} times the ball radius {radius:.3e}"
                ),
            });
        }
        guess_c = sol.c;
        phi = sol.phi.clone();
        if diff < opts.fp_tol {
            let c = [sol.c[0] - b[0], sol.c[1] - b[1]];
            return Ok(ContractionResult {
                x_norm: sol.x_norm,
                phi,
                c,
                history,
                ball_radius: radius,
                last_linear: sol,
            });
        }
    }
    Err(Error::ContractionDiverged {
        iter: opts.max_iter,
        reason: "iteration limit".into(),
    })
}

/// Controls of the outer iteration on `q`.
#[derive(Clone, Copy, Debug)]
pub struct AdjustOptions {
    pub c_tol: f64,
    pub max_outer: usize,
    /// Forward-difference step as a fraction of `t`.
    pub fd_fraction: f64,
    pub contraction: ContractionOptions,
}

impl Default for AdjustOptions {
    fn default() -> Self {
        AdjustOptions {
            c_tol: 1e-8,
            max_outer: 12,
            fd_fraction: 0.01,
            contraction: ContractionOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AdjustStep {
    pub q: Point,
    pub c: [f64; 2],
    pub fp_iters: usize,
}

pub struct AdjustResult<'a> {
    pub q_star: Point,
    pub problem: ReducedProblem<'a>,
    pub solution: ContractionResult,
    pub history: Vec<AdjustStep>,
    /// Fixed-point history of the cold start at `q0`.
    pub first_contraction: Vec<ContractionStep>,
    /// Condition number of the last finite-difference Jacobian of `q -> c(q)`.
    pub jacobian_cond: f64,
    pub jacobian_singular: bool,
}

fn cond2(m: &[[f64; 2]; 2]) -> f64 {
    let a = m[0][0] * m[0][0] + m[1][0] * m[1][0];
    let b = m[0][0] * m[0][1] + m[1][0] * m[1][1];
    let d = m[0][1] * m[0][1] + m[1][1] * m[1][1];
    let tr = a + d;
    let disc = ((a - d) * (a - d) + 4.0 * b * b).sqrt();
    let hi = (tr + disc) / 2.0;
    let lo = (tr - disc) / 2.0;
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        (hi / lo).sqrt()
    }
}

/// Newton iteration with a forward-difference Jacobian on `q -> c(q)`.
pub fn adjust_q<'a>(
    bg: &'a Background,
    pair: &CollapsePair,
    q0: Point,
    geom: &Geometry,
    norm_params: NormParams,
    opts: &AdjustOptions,
) -> Result<AdjustResult<'a>> {
    let t = pair.t();
    let limit = t * t.ln().abs();
    if norm(q0) >= limit {
        return Err(Error::OutOfRange(format!(
            "|q0| = {} must be below t |ln t| = {limit}",
            norm(q0)
        )));
    }
    let eval = |q: Point, start: Option<&PeriodicField>| -> Result<(ReducedProblem<'a>, ContractionResult)> {
        let prob = ReducedProblem::new(bg, pair, q, geom, norm_params)?;
        let sol = contraction_solve(&prob, start, &opts.contraction)?;
        Ok((prob, sol))
    };
    let mut q = q0;
    let (mut prob, mut sol) = eval(q, None)?;
    let first_contraction = sol.history.clone();
    let mut history = vec![AdjustStep {
        q,
        c: sol.c,
        fp_iters: sol.history.len(),
    }];
    let step = opts.fd_fraction * t;
    let mut jac_cond = f64::NAN;
    let mut singular = false;
    for _ in 0..opts.max_outer {
        let cn = sol.c[0].hypot(sol.c[1]);
        if cn < opts.c_tol {
            return Ok(AdjustResult {
                q_star: q,
                problem: prob,
                solution: sol,
                history,
                first_contraction,
                jacobian_cond: jac_cond,
                jacobian_singular: singular,
            });
        }
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let mut qk = q;
            qk[k] += step;
            let (_, sk) = eval(qk, Some(&sol.phi))?;
            for i in 0..2 {
                jac[i][k] = (sk.c[i] - sol.c[i]) / step;
            }
        }
        jac_cond = cond2(&jac);
        singular = jac_cond > 1e8;
        let dq = solve2(&jac, [-sol.c[0], -sol.c[1]]);
        let mut lambda = 1.0;
        let next = loop {
            let qn = [q[0] + lambda * dq[0], q[1] + lambda * dq[1]];
            match eval(qn, Some(&sol.phi)) {
                Ok((pn, sn)) if sn.c[0].hypot(sn.c[1]) < cn || lambda < 1.0 / 16.0 => {
                    break (qn, pn, sn)
                }
                Ok(_) | Err(Error::ContractionDiverged { .. }) if lambda >= 1.0 / 16.0 => {
                    lambda *= 0.5
                }
                Ok((pn, sn)) => break (qn, pn, sn),
                Err(e) => return Err(e),
            }
        };
        q = next.0;
        prob = next.1;
        sol = next.2;
        history.push(AdjustStep {
            q,
            c: sol.c,
            fp_iters: sol.history.len(),
        });
    }
    let cn = sol.c[0].hypot(sol.c[1]);
    if cn < opts.c_tol {
        return Ok(AdjustResult {
            q_star: q,
            problem: prob,
            solution: sol,
            history,
            first_contraction,
            jacobian_cond: jac_cond,
            jacobian_singular: singular,
        });
    }
    Err(Error::QAdjustDiverged {
        iters: opts.max_outer,
        c_norm: cn,
    })
}

/// Scaled integrals of `psi = phi - (density-weighted mean of phi)` over `B_Gamma`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct KernelMass {
    /// `integrate_{B_Gamma} Laplacian_z psi dz`.
    pub m0: f64,
    /// `integrate_{B_Gamma} psi / (1+|z|^2)^2 dz`.
    pub m1: f64,
    /// `integrate_{B_Gamma} 16 psi chi (1-|z|^2) / (1+|z|^2)^3 dz`.
    pub m2: f64,
    pub ln_t: f64,
}

pub fn kernel_mass_diagnostics(prob: &ReducedProblem<'_>, phi: &PeriodicField) -> KernelMass {
    let mean = prob.op.density().dot(phi);
    let lap = laplacian(phi);
    let fr = &prob.frame;
    let ll = fr.params.big_lambda * fr.params.big_lambda;
    let m0 = fr.core_integral(|_, i| lap.values()[i] / ll);
    let m1 = fr.core_integral(|z, i| {
        let s = 1.0 + z[0] * z[0] + z[1] * z[1];
        (phi.values()[i] - mean) / (s * s)
    });
    let m2 = fr.core_integral(|z, i| {
        let r2 = z[0] * z[0] + z[1] * z[1];
        let s = 1.0 + r2;
        16.0 * (phi.values()[i] - mean) * fr.chi.values()[i] * (1.0 - r2) / (s * s * s)
    });
    KernelMass {
        m0,
        m1,
        m2,
        ln_t: fr.params.t.ln(),
    }
}
