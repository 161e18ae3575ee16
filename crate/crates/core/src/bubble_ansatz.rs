//! The approximate solution `U_{t,q}`: a Liouville bubble glued at radius
//! `t R0` around `tq` to `w + 8 pi G(., tq)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::base_state::{
    assemble_h, check_rho, solve_base, BaseSolution, NewtonOptions, WeightSpec,
};
use crate::error::{Error, Result};
use crate::geom::{norm, scale, torus_disp, torus_dist, wrap_point, Point};
use crate::greens::{singular_weight, CollapsePair, GreenEvaluator};
use crate::spectral::{Grid, PeriodicField, SpectralField};

/// Everything that does not depend on `t` or `q`: the grid, Green's function,
/// the weight and the base solution `w`.
pub struct Background {
    pub green: GreenEvaluator,
    pub weight: WeightSpec,
    pub h: PeriodicField,
    pub base: BaseSolution,
    w_hat: SpectralField,
    mass: f64,
}

impl Background {
    /// Wraps an already converged base solution.
    pub fn new(green: GreenEvaluator, weight: WeightSpec, base: BaseSolution) -> Result<Self> {
        let h = assemble_h(&weight, &green)?;
        check_rho(base.rho)?;
        let w_hat = SpectralField::forward(&base.w);
        let mass = base.mass(&h);
        Ok(Background {
            green,
            weight,
            h,
            base,
            w_hat,
            mass,
        })
    }

    /// Assembles `h`, solves for `w` from zero and certifies the margin.
    pub fn solve(
        n: usize,
        rho: f64,
        weight: WeightSpec,
        newton: &NewtonOptions,
        margin_tol: f64,
    ) -> Result<Self> {
        let green = GreenEvaluator::new(Grid::new(n)?);
        let h = assemble_h(&weight, &green)?;
        let mut base = solve_base(rho, &h, &PeriodicField::zeros(green.grid()), newton)?;
        base.certify(&h, margin_tol)?;
        Background::new(green, weight, base)
    }

    pub fn grid(&self) -> Grid {
        self.green.grid()
    }

    pub fn rho(&self) -> f64 {
        self.base.rho
    }

    /// `integrate(h e^w)`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `ln(rho / (rho - 8 pi) integrate(h e^w))`.
    pub fn log_k(&self) -> f64 {
        let rho = self.rho();
        (rho / (rho - 8.0 * PI) * self.mass).ln()
    }

    pub fn w_at(&self, x: Point) -> f64 {
        self.w_hat.eval(wrap_point(x))
    }

    pub fn h_at(&self, x: Point) -> f64 {
        self.weight.eval(&self.green, x)
    }
}

/// Pointwise evaluator of `H_{t,q}(y)`.
pub struct HField<'a> {
    bg: &'a Background,
    pair: CollapsePair,
    tq: Point,
    r_tq: f64,
    w_tq: f64,
}

impl<'a> HField<'a> {
    /// Fails unless `|q| < r0`.
    pub fn new(bg: &'a Background, pair: &CollapsePair, q: Point, r0: f64) -> Result<Self> {
        if !(norm(q) < r0) {
            return Err(Error::OutOfRange(format!(
                "|q| = {} must be below r0 = {r0}",
                norm(q)
            )));
        }
        let tq = scale(pair.t(), q);
        Ok(HField {
            bg,
            pair: *pair,
            tq,
            r_tq: bg.green.robin(),
            w_tq: bg.w_at(tq),
        })
    }

    pub fn eval(&self, y: Point) -> f64 {
        let t = self.pair.t();
        let x = scale(t, y);
        let [a, b] = self.pair.sources();
        let da = torus_dist(x, a) / t;
        let db = torus_dist(x, b) / t;
        let green = &self.bg.green;
        let rt = 4.0 * PI * (green.regular_part(x, a) + green.regular_part(x, b));
        let expo = -rt + 8.0 * PI * green.regular_part(x, self.tq) - 8.0 * PI * self.r_tq
            + self.bg.w_at(x)
            - self.w_tq;
        self.bg.h_at(x) * da * da * db * db * expo.exp()
    }

    /// Central-difference gradient with step `step` in `y`.
    pub fn gradient(&self, y: Point, step: f64) -> Point {
        let d = |i: usize| {
            let mut p = y;
            let mut m = y;
            p[i] += step;
            m[i] -= step;
            (self.eval(p) - self.eval(m)) / (2.0 * step)
        };
        [d(0), d(1)]
    }
}

/// The constants of the ansatz.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BubbleParams {
    pub t: f64,
    pub q: Point,
    pub lambda: f64,
    pub c: f64,
    pub big_lambda: f64,
    pub gamma: f64,
    pub theta: f64,
    pub b_const: f64,
    pub r0_radius: f64,
    /// `H_{t,q}(q)`.
    pub h_q: f64,
    /// `R(tq, tq)`.
    pub robin: f64,
    /// `w(tq)`.
    pub w_tq: f64,
    /// `ln(rho / (rho - 8 pi) integrate(h e^w))`.
    pub log_k: f64,
}

impl BubbleParams {
    pub fn center(&self) -> Point {
        scale(self.t, self.q)
    }

    /// Radius `t R0` of the gluing circle.
    pub fn core_radius(&self) -> f64 {
        self.t * self.r0_radius
    }
}

/// Geometry constants: `R0` (gluing radius in `y`) and `r0` (bound on `|q|`).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Geometry {
    pub big_r0: f64,
    pub small_r0: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            big_r0: 2.2,
            small_r0: 0.45,
        }
    }
}

pub fn derive_params(
    bg: &Background,
    pair: &CollapsePair,
    q: Point,
    geom: &Geometry,
) -> Result<BubbleParams> {
    if !(geom.big_r0 > 2.0) || !(geom.small_r0 > 0.0 && geom.small_r0 < 0.5) {
        return Err(Error::OutOfRange(format!(
            "R0 = {} must exceed 2 and r0 = {} must lie in (0, 1/2)",
            geom.big_r0, geom.small_r0
        )));
    }
    let hf = HField::new(bg, pair, q, geom.small_r0)?;
    let t = pair.t();
    let rho = bg.rho();
    let h_q = hf.eval(q);
    let robin = hf.r_tq;
    let w_tq = hf.w_tq;
    let log_k = bg.log_k();
    let lambda = -2.0 * t.ln() - 2.0 * (rho * h_q / 8.0).ln() - 8.0 * PI * robin - w_tq + log_k;
    let c = (8.0 / (rho * h_q)).sqrt();
    let half = (lambda / 2.0).exp();
    let big_lambda = half / (c * t);
    let gamma = half / c * geom.big_r0;
    let theta = 1.0 / (1.0 + gamma * gamma);
    let b_const = -4.0 * (t * geom.big_r0).ln() * theta
        + 2.0 * (gamma * gamma / (1.0 + gamma * gamma)).ln();
    Ok(BubbleParams {
        t,
        q,
        lambda,
        c,
        big_lambda,
        gamma,
        theta,
        b_const,
        r0_radius: geom.big_r0,
        h_q,
        robin,
        w_tq,
        log_k,
    })
}

/// Which side of the gluing circle a formula belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Inner,
    Outer,
}

/// Pointwise branch formula of `u*`, usable on either side of the circle.
pub fn ustar_branch(p: &BubbleParams, bg: &Background, x: Point, branch: Branch) -> f64 {
    let tq = p.center();
    let common = p.lambda - 6.0 * p.t.ln() - 8.0 * PI * p.robin + bg.w_at(x) - p.w_tq + p.log_k;
    match branch {
        Branch::Inner => {
            let r = torus_dist(x, tq);
            common - 2.0 * (p.big_lambda * p.big_lambda * r * r).ln_1p()
                + 8.0 * PI * bg.green.regular_part(x, tq) * (1.0 - p.theta)
        }
        Branch::Outer => {
            let g = bg.green.green(x, tq);
            common - 2.0 * (p.gamma * p.gamma).ln_1p()
                + 8.0 * PI * (g + (p.core_radius()).ln() / (2.0 * PI)) * (1.0 - p.theta)
        }
    }
}

/// Pointwise `u*_{t,q}(x)`.
pub fn ustar_at(p: &BubbleParams, bg: &Background, x: Point) -> f64 {
    let branch = if torus_dist(x, p.center()) < p.core_radius() {
        Branch::Inner
    } else {
        Branch::Outer
    };
    ustar_branch(p, bg, x, branch)
}

/// Largest jumps of value and radial slope across the gluing circle.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct InterfaceJumps {
    pub value: f64,
    pub slope: f64,
}

pub fn interface_jumps(p: &BubbleParams, bg: &Background, samples: usize) -> InterfaceJumps {
    let tq = p.center();
    let r = p.core_radius();
    let dr = 1e-5 * r;
    let mut value = 0.0f64;
    let mut slope = 0.0f64;
    for k in 0..samples {
        let a = 2.0 * PI * k as f64 / samples as f64;
        let dir = [a.cos(), a.sin()];
        let at = |s: f64| [tq[0] + s * dir[0], tq[1] + s * dir[1]];
        let f = |s: f64, b: Branch| ustar_branch(p, bg, at(s), b);
        value = value.max((f(r, Branch::Inner) - f(r, Branch::Outer)).abs());
        let si = (f(r + dr, Branch::Inner) - f(r - dr, Branch::Inner)) / (2.0 * dr);
        let so = (f(r + dr, Branch::Outer) - f(r - dr, Branch::Outer)) / (2.0 * dr);
        slope = slope.max((si - so).abs());
    }
    InterfaceJumps { value, slope }
}

/// Assembled approximate solution.
#[derive(Clone, Debug)]
pub struct Ansatz {
    pub params: BubbleParams,
    pub ustar: PeriodicField,
    /// `U = ustar - mean(ustar)`.
    pub u: PeriodicField,
    pub mean_ustar: f64,
    /// `integrate(h e^{ustar - G_t}) / (rho/(rho - 8 pi) integrate(h e^w)) - 1`.
    pub a_const: f64,
    /// `e^{-G_t}` on the grid, kept for the nonlinear terms.
    pub singular: PeriodicField,
}

/// Fails with `UnderResolved` unless `1/Lambda >= 8/n`, and with `OutOfRange`
/// if the gluing disc would wrap around the torus.
pub fn check_resolution(p: &BubbleParams, grid: Grid) -> Result<()> {
    let n = grid.n() as f64;
    if 1.0 / p.big_lambda < 8.0 / n {
        return Err(Error::UnderResolved(format!(
            "bubble width 1/Lambda = {:.3e} is below 8 cells ({:.3e}); use n >= {}",
            1.0 / p.big_lambda,
            8.0 / n,
            (8.0 * p.big_lambda).ceil()
        )));
    }
    if p.core_radius() + norm(p.center()) >= 0.5 {
        return Err(Error::OutOfRange(format!(
            "gluing disc of radius t R0 = {} around tq does not fit in the unit cell",
            p.core_radius()
        )));
    }
    Ok(())
}

pub fn assemble_ansatz(p: &BubbleParams, bg: &Background, pair: &CollapsePair) -> Result<Ansatz> {
    let grid = bg.grid();
    check_resolution(p, grid)?;
    let tq = p.center();
    let r_field = bg.green.regular_field(tq);
    let g_field = bg.green.green_field(tq);
    let w = &bg.base.w;
    let common0 = p.lambda - 6.0 * p.t.ln() - 8.0 * PI * p.robin - p.w_tq + p.log_k;
    let outer_shift = -2.0 * (p.gamma * p.gamma).ln_1p()
        + 4.0 * p.core_radius().ln() * (1.0 - p.theta);
    let ll = p.big_lambda * p.big_lambda;
    let vals: Vec<f64> = (0..grid.len())
        .map(|idx| {
            let x = grid.node_at(idx);
            let r = torus_dist(x, tq);
            let base = common0 + w.values()[idx];
            if r < p.core_radius() {
                base - 2.0 * (ll * r * r).ln_1p()
                    + 8.0 * PI * r_field.values()[idx] * (1.0 - p.theta)
            } else {
                base + outer_shift + 8.0 * PI * g_field.values()[idx] * (1.0 - p.theta)
            }
        })
        .collect();
    let ustar = PeriodicField::new(grid, vals)?;
    let mean_ustar = ustar.mean();
    let u = ustar.add_constant(-mean_ustar);
    let singular = singular_weight(&bg.green, pair);
    let total = weighted_exp(&bg.h, &singular, &ustar).mean();
    let k = bg.log_k().exp();
    Ok(Ansatz {
        params: *p,
        ustar,
        u,
        mean_ustar,
        a_const: total / k - 1.0,
        singular,
    })
}

/// `h e^{v} e^{-G_t}` with `e^{-G_t}` supplied in factorized form.
pub fn weighted_exp(h: &PeriodicField, singular: &PeriodicField, v: &PeriodicField) -> PeriodicField {
    let vals = h
        .values()
        .iter()
        .zip(singular.values())
        .zip(v.values())
        .map(|((a, s), u)| a * s * u.exp())
        .collect();
    PeriodicField::new(h.grid(), vals).expect("finite weighted exponential")
}

/// Mass bookkeeping of the ansatz density.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MassSplit {
    /// `rho` times the fraction of the normalized density in `B_{tR0}(tq)`.
    pub inner_mass: f64,
    /// Max deviation from `(rho-8pi)/rho h e^w / integrate(h e^w)` at `d(x, tq) >= 2 t R0`.
    pub outer_density_error: f64,
    /// Same deviation restricted to `d(x, 0) > 1/4`.
    pub far_density_error: f64,
    pub a_const: f64,
}

pub fn ansatz_mass_split(ans: &Ansatz, bg: &Background) -> MassSplit {
    let p = &ans.params;
    let grid = bg.grid();
    let dens = weighted_exp(&bg.h, &ans.singular, &ans.ustar);
    let total = dens.mean();
    let rho = bg.rho();
    let tq = p.center();
    let n2 = grid.len() as f64;
    let mut inner = 0.0;
    let mut outer_err = 0.0f64;
    let mut far_err = 0.0f64;
    let ratio = (rho - 8.0 * PI) / rho / bg.mass();
    for idx in 0..grid.len() {
        let x = grid.node_at(idx);
        let r = torus_dist(x, tq);
        let f = dens.values()[idx] / total;
        if r < p.core_radius() {
            inner += f / n2;
            continue;
        }
        let target = ratio * bg.h.values()[idx] * bg.base.w.values()[idx].exp();
        let err = (f - target).abs();
        if r >= 2.0 * p.core_radius() {
            outer_err = outer_err.max(err);
        }
        if torus_dist(x, [0.0, 0.0]) > 0.25 {
            far_err = far_err.max(err);
        }
    }
    MassSplit {
        inner_mass: rho * inner,
        outer_density_error: outer_err,
        far_density_error: far_err,
        a_const: ans.a_const,
    }
}

/// Max over outer grid points of `|U - w - 8 pi G(., tq)|`.
pub fn outer_deviation(ans: &Ansatz, bg: &Background) -> f64 {
    outer_deviation_beyond(ans, bg, ans.params.core_radius())
}

/// Same as [`outer_deviation`] over grid points with `d(x, tq) >= radius`.
pub fn outer_deviation_beyond(ans: &Ansatz, bg: &Background, radius: f64) -> f64 {
    let p = &ans.params;
    let grid = bg.grid();
    let g = bg.green.green_field(p.center());
    let mut m = 0.0f64;
    for idx in 0..grid.len() {
        let x = grid.node_at(idx);
        if torus_dist(x, p.center()) >= radius {
            let d = ans.u.values()[idx] - bg.base.w.values()[idx] - 8.0 * PI * g.values()[idx];
            m = m.max(d.abs());
        }
    }
    m
}

/// Coordinates `z = Lambda (x - tq)` of a point, using the nearest image.
pub fn stretched(p: &BubbleParams, x: Point) -> Point {
    scale(p.big_lambda, torus_disp(x, p.center()))
}

/// JSON summary of one assembled ansatz.
#[derive(Clone, Debug, Serialize)]
pub struct AnsatzReport {
    pub params: BubbleParams,
    pub a_const: f64,
    pub mean_ustar: f64,
    pub interface_jumps: InterfaceJumps,
    pub mass_split: MassSplit,
}

impl AnsatzReport {
    pub fn new(ans: &Ansatz, bg: &Background) -> Self {
        AnsatzReport {
            params: ans.params,
            a_const: ans.a_const,
            mean_ustar: ans.mean_ustar,
            interface_jumps: interface_jumps(&ans.params, bg, 64),
            mass_split: ansatz_mass_split(ans, bg),
        }
    }
}
