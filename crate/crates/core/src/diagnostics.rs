//! Blow-up diagnostics of a computed solution, the per-`t` pipeline, and rate
//! fits across a sweep of collapse parameters.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use log::{info, warn};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::bubble_ansatz::{
    ansatz_mass_split, interface_jumps, outer_deviation, outer_deviation_beyond, Background,
    BubbleParams, InterfaceJumps, MassSplit,
};
use crate::config::SweepConfig;
use crate::error::{Error, Result};
use crate::geom::{norm, scale, torus_disp, torus_dist, Point};
use crate::greens::{singular_weight_at, CollapsePair};
use crate::reduction::{
    adjust_q, kernel_energy_radial, kernel_mass_diagnostics, ContractionStep, KernelMass,
    ReducedProblem,
};
use crate::spectral::{PeriodicField, SpectralField};

/// A candidate solution `u` together with its normalized density
/// `rho h e^{u - G_t} / integrate(h e^{u - G_t})`.
pub struct SolutionView<'a> {
    bg: &'a Background,
    pair: CollapsePair,
    params: BubbleParams,
    u: PeriodicField,
    u_hat: SpectralField,
    density: PeriodicField,
    log_mass: f64,
}

impl<'a> SolutionView<'a> {
    /// `singular` is `e^{-G_t}` on the grid; `params` locates the bubble.
    pub fn new(
        bg: &'a Background,
        pair: &CollapsePair,
        params: BubbleParams,
        singular: &PeriodicField,
        u: PeriodicField,
    ) -> Self {
        let top = u.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let raw = crate::bubble_ansatz::weighted_exp(&bg.h, singular, &u.add_constant(-top));
        let mass = raw.mean();
        let density = raw.scale(bg.rho() / mass);
        let u_hat = SpectralField::forward(&u);
        SolutionView {
            bg,
            pair: *pair,
            params,
            u,
            u_hat,
            density,
            log_mass: top + mass.ln(),
        }
    }

    /// The view of `U + phi` for a reduced problem.
    pub fn from_problem(prob: &ReducedProblem<'a>, phi: &PeriodicField) -> Self {
        let u = prob.ansatz.u.add(phi);
        SolutionView::new(prob.bg, &prob.pair, *prob.params(), &prob.ansatz.singular, u)
    }

    pub fn u(&self) -> &PeriodicField {
        &self.u
    }

    /// `ln integrate(h e^{u - G_t})`.
    pub fn log_mass(&self) -> f64 {
        self.log_mass
    }

    /// Normalized density; its integral is `rho`.
    pub fn density(&self) -> &PeriodicField {
        &self.density
    }

    /// `rho` times the share of the normalized density in `B_r(center)`.
    pub fn local_mass(&self, center: Point, r: f64) -> f64 {
        let grid = self.bg.grid();
        let n2 = grid.len() as f64;
        let s: f64 = (0..grid.len())
            .filter(|&idx| torus_dist(grid.node_at(idx), center) < r)
            .map(|idx| self.density.values()[idx])
            .sum();
        s / n2
    }

    /// Local mass around `tq` at each radius.
    pub fn sigma0_curve(&self, radii: &[f64]) -> Vec<[f64; 2]> {
        let c = self.params.center();
        radii.iter().map(|&r| [r, self.local_mass(c, r)]).collect()
    }

    /// `sigma0` at `r = t^{1/2}`, `m0` over `|z| <= Gamma / 2`, and the
    /// residual of `(s - m)(s + m) = 24 pi (s - m)`.
    pub fn pohozaev(&self) -> Pohozaev {
        let c = self.params.center();
        let t = self.params.t;
        let r_sigma = t.sqrt();
        let r_m = 0.5 * self.params.gamma / self.params.big_lambda;
        let sigma0 = self.local_mass(c, r_sigma);
        let m0 = self.local_mass(c, r_m);
        let d = sigma0 - m0;
        Pohozaev {
            sigma0,
            m0,
            r_sigma,
            r_m,
            residual: d * (sigma0 + m0) - 24.0 * PI * d,
        }
    }

    /// `vbar_t(y) = u(ty) - ln integrate(h e^{u - G_t}) + 6 ln t - w(ty)` at a point `x = ty`.
    fn vbar_at(&self, x: Point) -> f64 {
        self.u_hat.eval(x) - self.bg.w_at(x) - self.log_mass + 6.0 * self.params.t.ln()
    }

    /// Maximum of `vbar_t` over `B_{r0}(0)`, and the weighted size of the
    /// doubly scaled error `eta` over `|z| <= Gamma / 2`.
    pub fn profile_fit(&self, small_r0: f64, eps: f64, max_ratio: f64) -> Result<ProfileFit> {
        let grid = self.bg.grid();
        let t = self.params.t;
        let log6 = 6.0 * t.ln() - self.log_mass;
        let w = &self.bg.base.w;
        let vbar = |idx: usize| self.u.values()[idx] - w.values()[idx] + log6;
        let mut best = None::<(usize, f64)>;
        for idx in 0..grid.len() {
            if torus_dist(grid.node_at(idx), [0.0, 0.0]) < small_r0 * t {
                let v = vbar(idx);
                if best.map_or(true, |(_, b)| v > b) {
                    best = Some((idx, v));
                }
            }
        }
        let (idx0, v0) = best.ok_or_else(|| Error::OutOfRange("empty search disc".into()))?;
        let x0 = torus_disp(grid.node_at(idx0), [0.0, 0.0]);
        let (x_star, lambda_meas) = self.refine_max(x0, v0, grid.spacing());
        let p_t = scale(1.0 / t, x_star);
        let ratio = norm(p_t) / t;
        if ratio > max_ratio || norm(p_t) >= small_r0 {
            return Err(Error::MaxNotInCore(norm(p_t)));
        }

        let rho = self.bg.rho();
        let c_t = rho
            * self.bg.h_at(x_star)
            * self.bg.w_at(x_star).exp()
            * singular_weight_at(&self.bg.green, &self.pair, x_star)
            / (8.0 * t.powi(4));
        let r_t = c_t.sqrt() * (lambda_meas / 2.0).exp();
        let rho_t = self.local_mass(self.params.center(), self.params.core_radius());
        let reg = self.bg.green.regular_field(x_star);
        let reg0 = self.bg.green.regular_part(x_star, x_star);
        let z_max = 0.5 * self.params.gamma;
        let mut eta_max = 0.0f64;
        let mut eta_weighted = 0.0f64;
        let mut samples = 0usize;
        for idx in 0..grid.len() {
            let d = torus_disp(grid.node_at(idx), x_star);
            let z = scale(r_t / t, d);
            let rz = norm(z);
            if rz > z_max {
                continue;
            }
            let bubble = lambda_meas - 2.0 * (rz * rz).ln_1p();
            let eta = vbar(idx) - bubble - rho_t * (reg.values()[idx] - reg0);
            eta_max = eta_max.max(eta.abs());
            eta_weighted = eta_weighted.max(eta.abs() / (1.0 + rz).powf(eps));
            samples += 1;
        }
        Ok(ProfileFit {
            p_t,
            peak_ratio: ratio,
            lambda_meas,
            c_t,
            r_t,
            eta_max,
            eta_max_weighted: eta_weighted,
            eta_samples: samples,
        })
    }

    /// Newton steps on the spectral interpolant from a grid maximum.
    fn refine_max(&self, x0: Point, v0: f64, cell: f64) -> (Point, f64) {
        let f = |x: Point| self.vbar_at(x);
        let hs = 0.05 / self.params.big_lambda;
        let mut x = x0;
        let mut fx = f(x);
        for _ in 0..12 {
            let fpx = f([x[0] + hs, x[1]]);
            let fmx = f([x[0] - hs, x[1]]);
            let fpy = f([x[0], x[1] + hs]);
            let fmy = f([x[0], x[1] - hs]);
            let fpp = f([x[0] + hs, x[1] + hs]);
            let fpm = f([x[0] + hs, x[1] - hs]);
            let fmp = f([x[0] - hs, x[1] + hs]);
            let fmm = f([x[0] - hs, x[1] - hs]);
            let g = [(fpx - fmx) / (2.0 * hs), (fpy - fmy) / (2.0 * hs)];
            let hxx = (fpx - 2.0 * fx + fmx) / (hs * hs);
            let hyy = (fpy - 2.0 * fx + fmy) / (hs * hs);
            let hxy = (fpp - fpm - fmp + fmm) / (4.0 * hs * hs);
            let det = hxx * hyy - hxy * hxy;
            if !(det > 0.0 && hxx < 0.0) {
                break;
            }
            let dx = [
                -(hyy * g[0] - hxy * g[1]) / det,
                -(hxx * g[1] - hxy * g[0]) / det,
            ];
            if norm(dx) > 2.0 * cell {
                break;
            }
            let xn = [x[0] + dx[0], x[1] + dx[1]];
            let fxn = f(xn);
            if fxn < fx {
                break;
            }
            x = xn;
            fx = fxn;
            if norm(dx) < 1e-13 {
                break;
            }
        }
        if fx >= v0 {
            (x, fx)
        } else {
            (x0, v0)
        }
    }

    /// Largest `|u - w - 8 pi G(., center)|` over grid points with `d(x, center) >= radius`.
    pub fn outer_error(&self, center: Point, radius: f64) -> Result<f64> {
        let grid = self.bg.grid();
        let g = self.bg.green.green_field(center);
        let w = &self.bg.base.w;
        let mut m = None::<f64>;
        for idx in 0..grid.len() {
            if torus_dist(grid.node_at(idx), center) >= radius {
                let d = self.u.values()[idx] - w.values()[idx] - 8.0 * PI * g.values()[idx];
                m = Some(m.map_or(d.abs(), |v: f64| v.max(d.abs())));
            }
        }
        m.ok_or_else(|| {
            Error::OutOfRange(format!("no grid point at distance >= {radius} from the bubble"))
        })
    }

    /// `u(x) - w(x) - 8 pi G(x, 0)` at `x = (1/2, 1/2)`.
    pub fn far_point_error(&self) -> f64 {
        let x = [0.5, 0.5];
        self.u_hat.eval(x) - self.bg.w_at(x) - 8.0 * PI * self.bg.green.green(x, [0.0, 0.0])
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Pohozaev {
    pub sigma0: f64,
    pub m0: f64,
    /// Radius used for `sigma0`.
    pub r_sigma: f64,
    /// Radius in `x` of the disc `|z| <= Gamma / 2` used for `m0`.
    pub r_m: f64,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProfileFit {
    /// Maximum point of `vbar_t`, in `y = x / t`.
    pub p_t: Point,
    /// `|p_t| / t`.
    pub peak_ratio: f64,
    pub lambda_meas: f64,
    pub c_t: f64,
    /// Second scaling factor `sqrt(C_t) e^{lambda_t / 2}`.
    pub r_t: f64,
    pub eta_max: f64,
    /// `max |eta(z)| / (1 + |z|)^eps`.
    pub eta_max_weighted: f64,
    pub eta_samples: usize,
}

/// Ansatz quantities at `q = q0`, before any correction.
#[derive(Clone, Debug, Serialize)]
pub struct AnsatzSummary {
    pub params: BubbleParams,
    pub mean_ustar: f64,
    pub a_const: f64,
    pub interface_jumps: InterfaceJumps,
    pub mass_split: MassSplit,
    /// `|U - w - 8 pi G(., tq)|` outside `B_{tR0}(tq)`.
    pub outer_deviation: f64,
    /// The same outside `B_{2tR0}(tq)`.
    pub outer_deviation_far: f64,
}

/// Frame identities at `q = q0`.
#[derive(Clone, Debug, Serialize)]
pub struct FrameSummary {
    pub core_points: usize,
    /// Grid integral of each kernel before its mean was removed.
    pub z_mean: [f64; 2],
    /// Grid integral of the kernels used.
    pub z_mean_used: [f64; 2],
    pub gram: [[f64; 2]; 2],
    /// Diagonal energy from the grid.
    pub energy: [f64; 2],
    /// The same energy by radial quadrature.
    pub energy_radial: f64,
    /// `|Z_i|_Y`.
    pub z_y_norm: [f64; 2],
}

/// One bordered solve of the projected `g(0)` at `q = q0`, repeated from a
/// second starting guess.
#[derive(Clone, Debug, Serialize)]
pub struct LinearSummary {
    pub iterations: usize,
    pub residual: f64,
    pub constraint: f64,
    pub bound_ratio: f64,
    pub x_norm: f64,
    pub y_norm: f64,
    /// Max difference between the two solves.
    pub restart_difference: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BallSummary {
    pub sup: f64,
    pub x_norm: f64,
    pub radius: f64,
    pub inside: bool,
}

/// Everything measured for one value of `t`.
#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub t: f64,
    pub grid_n: usize,
    pub q_star: Point,
    /// `lambda_{t,q*}`.
    pub lambda_tq: f64,
    /// `lambda_{t,q*} - w(tq*)`, the predicted maximum of `vbar_t`.
    pub lambda_pred: f64,
    pub lambda_meas: f64,
    pub rho_t: f64,
    pub sigma0_curve: Vec<[f64; 2]>,
    pub pohozaev: Pohozaev,
    pub outer_err: f64,
    pub far_point_err: f64,
    pub profile: ProfileFit,
    pub eta_profile: f64,
    pub residual: f64,
    pub mean_u: f64,
    pub c_final: [f64; 2],
    pub contraction_factor: f64,
    pub contraction_steps: Vec<ContractionStep>,
    pub adjust_steps: usize,
    pub jacobian_cond: f64,
    pub ball: BallSummary,
    pub kernel_mass: KernelMass,
    pub ansatz: AnsatzSummary,
    pub frame: FrameSummary,
    pub linear: LinearSummary,
}

impl SolveReport {
    /// Every numeric entry is finite.
    pub fn is_finite(&self) -> bool {
        serde_json::to_value(self)
            .map(|v| all_finite(&v))
            .unwrap_or(false)
    }
}

fn all_finite(v: &serde_json::Value) -> bool {
    match v {
        serde_json::Value::Null => false,
        serde_json::Value::Number(n) => n.as_f64().is_some_and(f64::is_finite),
        serde_json::Value::Array(a) => a.iter().all(all_finite),
        serde_json::Value::Object(o) => o.values().all(all_finite),
        _ => true,
    }
}

/// Fields of a solved point, for dumps.
pub struct SolvedFields {
    pub u: PeriodicField,
    pub phi: PeriodicField,
}

/// Floor below which successive differences are too small to give a
/// meaningful contraction ratio.
pub const CONTRACTION_FLOOR: f64 = 1e-8;

fn probe_guess(grid: crate::spectral::Grid) -> PeriodicField {
    PeriodicField::from_fn(grid, |x| {
        let a = 2.0 * PI * x[0];
        let b = 2.0 * PI * x[1];
        0.1 * (a.sin() + (a - b).cos() + 0.5 * (3.0 * b).sin())
    })
    .mean_free()
}

/// Runs ansatz, frame, linear check, `q` adjustment and diagnostics at one `t`.
pub fn solve_point(
    bg: &Background,
    t: f64,
    cfg: &SweepConfig,
) -> Result<(SolveReport, SolvedFields)> {
    let pair = CollapsePair::new(t, cfg.e_dir)?;
    let prob0 = ReducedProblem::new(bg, &pair, cfg.q0, &cfg.geometry, cfg.norm)?;
    let ans = &prob0.ansatz;
    let p0 = *prob0.params();
    let ansatz = AnsatzSummary {
        params: p0,
        mean_ustar: ans.mean_ustar,
        a_const: ans.a_const,
        interface_jumps: interface_jumps(&p0, bg, 64),
        mass_split: ansatz_mass_split(ans, bg),
        outer_deviation: outer_deviation(ans, bg),
        outer_deviation_far: outer_deviation_beyond(ans, bg, 2.0 * p0.core_radius()),
    };
    let fr = &prob0.frame;
    let frame = FrameSummary {
        core_points: fr.core_points(),
        z_mean: fr.z_mean_defect,
        z_mean_used: [fr.z[0].mean(), fr.z[1].mean()],
        gram: fr.gram,
        energy: fr.energy,
        energy_radial: kernel_energy_radial(p0.gamma),
        z_y_norm: [fr.norm_y(&fr.z[0])?, fr.norm_y(&fr.z[1])?],
    };

    let g0 = prob0.residual_g(&PeriodicField::zeros(bg.grid()));
    let (gp, _) = fr.project(&g0);
    let lin = &cfg.adjust.contraction.linear;
    let s1 = prob0.solve_reduced(&gp, None, lin)?;
    let s2 = prob0.solve_reduced(&gp, Some((&probe_guess(bg.grid()), [1.0, -1.0])), lin)?;
    let linear = LinearSummary {
        iterations: s1.linear_iters,
        residual: s1.residual,
        constraint: s1.constraint,
        bound_ratio: s1.bound_ratio,
        x_norm: s1.x_norm,
        y_norm: s1.y_norm,
        restart_difference: s1.phi.max_abs_diff(&s2.phi),
    };
    info!("t = {t}: ansatz and frame ready, adjusting q");

    let adj = adjust_q(bg, &pair, cfg.q0, &cfg.geometry, cfg.norm, &cfg.adjust)?;
    let prob = &adj.problem;
    let sol = &adj.solution;
    let p = *prob.params();
    let view = SolutionView::from_problem(prob, &sol.phi);
    let radii: Vec<f64> = cfg
        .sigma_radii
        .iter()
        .copied()
        .chain([p.core_radius(), t.sqrt()])
        .collect();
    let profile = view.profile_fit(cfg.geometry.small_r0, cfg.eps, cfg.max_peak_ratio)?;
    let residual = prob.full_residual(&sol.phi).max_abs();
    let contraction = crate::reduction::ContractionResult::factor_of(&adj.first_contraction, CONTRACTION_FLOOR);
    let report = SolveReport {
        t,
        grid_n: bg.grid().n(),
        q_star: adj.q_star,
        lambda_tq: p.lambda,
        lambda_pred: p.lambda - p.w_tq,
        lambda_meas: profile.lambda_meas,
        rho_t: view.local_mass(p.center(), p.core_radius()),
        sigma0_curve: view.sigma0_curve(&radii),
        pohozaev: view.pohozaev(),
        outer_err: view.outer_error(p.center(), 2.0 * p.core_radius())?,
        far_point_err: view.far_point_error(),
        eta_profile: profile.eta_max_weighted,
        profile,
        residual,
        mean_u: view.u().mean(),
        c_final: sol.c,
        contraction_factor: contraction,
        contraction_steps: adj.first_contraction.clone(),
        adjust_steps: adj.history.len() - 1,
        jacobian_cond: adj.jacobian_cond,
        ball: BallSummary {
            sup: sol.phi.max_abs(),
            x_norm: sol.x_norm,
            radius: sol.ball_radius,
            inside: sol.in_ball(),
        },
        kernel_mass: kernel_mass_diagnostics(prob, &sol.phi),
        ansatz,
        frame,
        linear,
    };
    let fields = SolvedFields {
        u: view.u().clone(),
        phi: sol.phi.clone(),
    };
    Ok((report, fields))
}

/// Diagnostics of an externally supplied `u` at a given `(t, q)`.
#[derive(Clone, Debug, Serialize)]
pub struct FieldReport {
    pub t: f64,
    pub q: Point,
    pub grid_n: usize,
    pub lambda_pred: f64,
    pub rho_t: f64,
    pub sigma0_curve: Vec<[f64; 2]>,
    pub pohozaev: Pohozaev,
    /// `None` when the maximum of `vbar_t` is not in the core.
    pub profile: Option<ProfileFit>,
    /// `None` when no grid point lies outside `B_{2tR0}(tq)`.
    pub outer_err: Option<f64>,
    pub far_point_err: f64,
    pub residual: f64,
    pub mean_u: f64,
}

/// Runs the blow-up diagnostics on `u` with the bubble located by `(t, q)`.
pub fn diagnose_field(
    bg: &Background,
    t: f64,
    q: Point,
    cfg: &SweepConfig,
    u: PeriodicField,
) -> Result<FieldReport> {
    if u.grid() != bg.grid() {
        return Err(Error::GridMismatch(u.grid().n(), bg.grid().n()));
    }
    let pair = CollapsePair::new(t, cfg.e_dir)?;
    let p = crate::bubble_ansatz::derive_params(bg, &pair, q, &cfg.geometry)?;
    crate::bubble_ansatz::check_resolution(&p, bg.grid())?;
    let singular = crate::greens::singular_weight(&bg.green, &pair);
    let residual = crate::reduction::full_equation_residual(bg, &singular, &u).max_abs();
    let view = SolutionView::new(bg, &pair, p, &singular, u);
    let radii: Vec<f64> = cfg
        .sigma_radii
        .iter()
        .copied()
        .chain([p.core_radius(), t.sqrt()])
        .collect();
    let profile = match view.profile_fit(cfg.geometry.small_r0, cfg.eps, cfg.max_peak_ratio) {
        Ok(f) => Some(f),
        Err(Error::MaxNotInCore(r)) => {
            warn!("maximum of vbar_t at |p|/t = {r:.3} is outside the core");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(FieldReport {
        t,
        q,
        grid_n: bg.grid().n(),
        lambda_pred: p.lambda - p.w_tq,
        rho_t: view.local_mass(p.center(), p.core_radius()),
        sigma0_curve: view.sigma0_curve(&radii),
        pohozaev: view.pohozaev(),
        profile,
        outer_err: view.outer_error(p.center(), 2.0 * p.core_radius()).ok(),
        far_point_err: view.far_point_error(),
        residual,
        mean_u: view.u().mean(),
    })
}

/// Least-squares fit of `ln y = a + b ln t`.
#[derive(Clone, Debug, Serialize)]
pub struct RateFit {
    pub exponent: f64,
    /// 95% confidence half-width of the exponent.
    pub half_width: f64,
    pub intercept: f64,
    pub points: usize,
    /// Whether `y` was divided by `|ln t|` before fitting.
    pub log_corrected: bool,
}

pub fn fit_rate(t: &[f64], y: &[f64], divide_log: bool) -> Result<RateFit> {
    if t.len() != y.len() {
        return Err(Error::OutOfRange("fit arrays differ in length".into()));
    }
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(_, &v)| v > 0.0 && v.is_finite())
        .map(|(&tt, &v)| {
            let v = if divide_log { v / tt.ln().abs() } else { v };
            (tt.ln(), v.ln())
        })
        .collect();
    let n = pts.len();
    if n < 3 {
        return Err(Error::TooFewPoints(n));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - a - b * p.0).powi(2)).sum();
    let se = (sse / (nf - 2.0) / sxx).sqrt();
    let q = StudentsT::new(0.0, 1.0, nf - 2.0)
        .map_err(|e| Error::OutOfRange(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(RateFit {
        exponent: b,
        half_width: q * se,
        intercept: a,
        points: n,
        log_corrected: divide_log,
    })
}

/// Result of one sweep point.
#[derive(Clone, Debug, Serialize)]
pub struct PointOutcome {
    pub t: f64,
    pub grid_n: usize,
    pub report: Option<SolveReport>,
    pub error: Option<String>,
}

/// Base state summary per grid.
#[derive(Clone, Debug, Serialize)]
pub struct BaseSummary {
    pub grid_n: usize,
    pub newton_steps: usize,
    pub residual: f64,
    pub margin: f64,
}

/// Fitted exponents; `None` when fewer than three points succeeded.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SweepFits {
    /// `|integrate(ustar)| / |ln t|`.
    pub mean_ustar: Option<RateFit>,
    /// Outer deviation of the ansatz, divided by `|ln t|`.
    pub ansatz_outer: Option<RateFit>,
    /// `|rho_t - 8 pi| / |ln t|`.
    pub rho_gap: Option<RateFit>,
    pub outer_err: Option<RateFit>,
    pub lambda_gap: Option<RateFit>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub t: Vec<f64>,
    pub bases: Vec<BaseSummary>,
    pub points: Vec<PointOutcome>,
    pub fits: SweepFits,
}

impl SweepResult {
    pub fn reports(&self) -> impl Iterator<Item = &SolveReport> {
        self.points.iter().filter_map(|p| p.report.as_ref())
    }

    pub fn successes(&self) -> usize {
        self.reports().count()
    }
}

fn fit_of(reports: &[&SolveReport], f: impl Fn(&SolveReport) -> f64, log: bool) -> Option<RateFit> {
    let t: Vec<f64> = reports.iter().map(|r| r.t).collect();
    let y: Vec<f64> = reports.iter().map(|r| f(r)).collect();
    fit_rate(&t, &y, log).ok()
}

pub fn fit_sweep(reports: &[&SolveReport]) -> SweepFits {
    SweepFits {
        mean_ustar: fit_of(reports, |r| r.ansatz.mean_ustar.abs(), true),
        ansatz_outer: fit_of(reports, |r| r.ansatz.outer_deviation, true),
        rho_gap: fit_of(reports, |r| (r.rho_t - 8.0 * PI).abs(), true),
        outer_err: fit_of(reports, |r| r.outer_err, false),
        lambda_gap: fit_of(reports, |r| (r.lambda_meas - r.lambda_pred).abs(), false),
    }
}

/// Solves every `t` of the config; a failed point is recorded and skipped.
/// Each callback receives the fields of a successful point.
pub fn run_sweep(
    cfg: &SweepConfig,
    mut on_fields: impl FnMut(f64, &SolvedFields),
) -> Result<SweepResult> {
    cfg.validate()?;
    let mut bases: BTreeMap<usize, std::result::Result<Background, String>> = BTreeMap::new();
    let mut points = Vec::new();
    for (k, &t) in cfg.t_list.iter().enumerate() {
        let n = cfg.grid_for(k);
        let bg = bases.entry(n).or_insert_with(|| {
            info!("solving the base equation on a {n} x {n} grid");
            Background::solve(n, cfg.rho, cfg.weight.clone(), &cfg.newton, cfg.margin_tol)
                .map_err(|e| e.to_string())
        });
        let outcome = match bg {
            Err(e) => Err(e.clone()),
            Ok(bg) => solve_point(bg, t, cfg).map_err(|e| e.to_string()).map(|(r, f)| {
                on_fields(t, &f);
                r
            }),
        };
        match outcome {
            Ok(r) => {
                info!("t = {t}: residual {:.2e}, lambda_meas {:.4}", r.residual, r.lambda_meas);
                points.push(PointOutcome {
                    t,
                    grid_n: n,
                    report: Some(r),
                    error: None,
                });
            }
            Err(e) => {
                warn!("t = {t}: {e}");
                points.push(PointOutcome {
                    t,
                    grid_n: n,
                    report: None,
                    error: Some(e),
                });
            }
        }
    }
    let base_list = bases
        .iter()
        .filter_map(|(&n, b)| b.as_ref().ok().map(|b| (n, b)))
        .map(|(n, b)| BaseSummary {
            grid_n: n,
            newton_steps: b.base.newton_steps(),
            residual: b.base.residual,
            margin: b.base.margin.unwrap_or(f64::NAN),
        })
        .collect();
    let reports: Vec<&SolveReport> = points.iter().filter_map(|p| p.report.as_ref()).collect();
    let fits = fit_sweep(&reports);
    Ok(SweepResult {
        t: cfg.t_list.clone(),
        bases: base_list,
        points,
        fits,
    })
}
