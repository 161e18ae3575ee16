//! Green's function of `-Laplacian` on the unit torus, its regular part, and
//! the collapsing pair of vortices.
//!
//! `G(x, p) = s(d) + S(x - p)` where `s(r) = -ln(r) W(r) / (2 pi)` is the
//! logarithm cut off by a smooth window `W` and `S` is a smooth periodic
//! remainder found spectrally. The additive constant is fixed by the exact
//! integral of `s`, so `G` has zero continuum mean.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::geom::{norm, torus_disp, torus_dist, Point};
use crate::quad;
use crate::spectral::{Grid, PeriodicField, SpectralField};

const INV_2PI: f64 = 1.0 / (2.0 * PI);

/// Smooth radial step: 1 on `[0, inner]`, 0 on `[outer, inf)`, C-infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub inner: f64,
    pub outer: f64,
}

fn psi(x: f64) -> [f64; 3] {
    if x <= 0.0 {
        return [0.0; 3];
    }
    let e = (-1.0 / x).exp();
    let x2 = x * x;
    [e, e / x2, e * (1.0 / (x2 * x2) - 2.0 / (x2 * x))]
}

impl Window {
    pub const DEFAULT: Window = Window {
        inner: 0.1,
        outer: 0.4,
    };

    /// `W, W', W''` at radius `r`.
    pub fn eval(&self, r: f64) -> [f64; 3] {
        if r <= self.inner {
            return [1.0, 0.0, 0.0];
        }
        if r >= self.outer {
            return [0.0; 3];
        }
        let len = self.outer - self.inner;
        let u = (r - self.inner) / len;
        let [p, p1, p2] = psi(u);
        let [q, q1, q2] = psi(1.0 - u);
        let d = p + q;
        let num = p1 * q + p * q1;
        let dnum = p2 * q - p * q2;
        let dd = p1 - q1;
        let sigma = p / d;
        let sigma1 = num / (d * d);
        let sigma2 = (dnum * d - 2.0 * num * dd) / (d * d * d);
        [1.0 - sigma, -sigma1 / len, -sigma2 / (len * len)]
    }
}

/// `s(r) = -ln(r) W(r) / (2 pi)`; infinite at `r = 0`.
pub fn windowed_log(window: &Window, r: f64) -> f64 {
    let w = window.eval(r)[0];
    if w == 0.0 {
        0.0
    } else {
        -r.ln() * INV_2PI * w
    }
}

/// Smooth source `f` with `-Laplacian s = delta_0 + f`; supported on the window ramp.
pub fn window_source(window: &Window, r: f64) -> f64 {
    if r <= window.inner || r >= window.outer {
        return 0.0;
    }
    let [_, w1, w2] = window.eval(r);
    let l = -r.ln() * INV_2PI;
    let l1 = -INV_2PI / r;
    -l * (w2 + w1 / r) - 2.0 * l1 * w1
}

/// Exact plane integral of `s`.
pub fn windowed_log_integral(window: &Window) -> f64 {
    let f = |r: f64| {
        if r <= 0.0 {
            0.0
        } else {
            -r * r.ln() * window.eval(r)[0]
        }
    };
    quad::tanh_sinh(f, 0.0, window.inner, 1e-15).value
        + quad::tanh_sinh(f, window.inner, window.outer, 1e-15).value
}

type FieldCache = Mutex<HashMap<[u64; 2], Arc<PeriodicField>>>;

/// Green's function machinery on a fixed grid.
pub struct GreenEvaluator {
    grid: Grid,
    window: Window,
    remainder: SpectralField,
    remainder_field: PeriodicField,
    log_integral: f64,
    regular_cache: FieldCache,
}

impl std::fmt::Debug for GreenEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenEvaluator")
            .field("n", &self.grid.n())
            .field("window", &self.window)
            .finish()
    }
}

fn key(p: Point) -> [u64; 2] {
    [p[0].to_bits(), p[1].to_bits()]
}

impl GreenEvaluator {
    pub fn new(grid: Grid) -> Self {
        Self::with_window(grid, Window::DEFAULT)
    }

    pub fn with_window(grid: Grid, window: Window) -> Self {
        let source = PeriodicField::from_fn(grid, |x| window_source(&window, norm(torus_disp(x, [0.0, 0.0]))));
        let log_integral = windowed_log_integral(&window);
        // -Laplacian S = -(1 + f); the constant only touches k = 0.
        let mut remainder = SpectralField::forward(&source)
            .inverse_neg_laplacian()
            .scale(-1.0);
        remainder.set_mean(-log_integral);
        let remainder_field = remainder.inverse();
        GreenEvaluator {
            grid,
            window,
            remainder,
            remainder_field,
            log_integral,
            regular_cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// Plane integral of the windowed logarithm.
    pub fn log_integral(&self) -> f64 {
        self.log_integral
    }

    /// Spectral coefficients of the smooth remainder `S`.
    pub fn remainder(&self) -> &SpectralField {
        &self.remainder
    }

    /// Robin constant `R(p, p)`, the same for every `p`.
    pub fn robin(&self) -> f64 {
        self.remainder_field.values()[0]
    }

    fn remainder_at(&self, y: Point) -> f64 {
        let h = self.grid.spacing();
        let n = self.grid.n();
        let fi = y[0] / h;
        let fj = y[1] / h;
        if (fi - fi.round()).abs() < 1e-12 && (fj - fj.round()).abs() < 1e-12 {
            let i = (fi.round() as i64).rem_euclid(n as i64) as usize;
            let j = (fj.round() as i64).rem_euclid(n as i64) as usize;
            return self.remainder_field.at(i, j);
        }
        self.remainder.eval(y)
    }

    /// `G(x, p)`; infinite when `x = p`.
    pub fn green(&self, x: Point, p: Point) -> f64 {
        let y = torus_disp(x, p);
        windowed_log(&self.window, norm(y)) + self.remainder_at(y)
    }

    /// Regular part `R(x, p) = G(x, p) + ln(d(x, p)) / (2 pi)`.
    pub fn regular_part(&self, x: Point, p: Point) -> f64 {
        let y = torus_disp(x, p);
        let d = norm(y);
        let w = self.window.eval(d)[0];
        let log_term = if w == 1.0 { 0.0 } else { d.ln() * INV_2PI * (1.0 - w) };
        self.remainder_at(y) + log_term
    }

    /// `S(x - p)` sampled on the grid.
    fn remainder_shifted(&self, p: Point) -> PeriodicField {
        let n = self.grid.n();
        let fi = p[0] * n as f64;
        let fj = p[1] * n as f64;
        if (fi - fi.round()).abs() < 1e-12 && (fj - fj.round()).abs() < 1e-12 {
            let si = (fi.round() as i64).rem_euclid(n as i64) as usize;
            let sj = (fj.round() as i64).rem_euclid(n as i64) as usize;
            let src = self.remainder_field.values();
            let mut out = vec![0.0; n * n];
            for i in 0..n {
                let ii = (i + n - si) % n;
                for j in 0..n {
                    out[i * n + j] = src[ii * n + (j + n - sj) % n];
                }
            }
            return PeriodicField::from_vec(self.grid, out);
        }
        self.remainder.translate(p).inverse()
    }

    /// `G(., p)` on the grid; the sample at `x = p`, if it is a node, holds `R(p, p)`.
    pub fn green_field(&self, p: Point) -> PeriodicField {
        let mut f = self.remainder_shifted(p);
        let grid = self.grid;
        for (idx, v) in f.values_mut().iter_mut().enumerate() {
            let d = torus_dist(grid.node_at(idx), p);
            if d > 0.0 {
                *v += windowed_log(&self.window, d);
            }
        }
        f
    }

    /// `R(., p)` on the grid; cached per source point.
    pub fn regular_field(&self, p: Point) -> Arc<PeriodicField> {
        if let Some(f) = self.regular_cache.lock().expect("cache").get(&key(p)) {
            return f.clone();
        }
        let mut f = self.remainder_shifted(p);
        let grid = self.grid;
        for (idx, v) in f.values_mut().iter_mut().enumerate() {
            let d = torus_dist(grid.node_at(idx), p);
            let w = self.window.eval(d)[0];
            if w < 1.0 {
                *v += d.ln() * INV_2PI * (1.0 - w);
            }
        }
        let f = Arc::new(f);
        self.regular_cache
            .lock()
            .expect("cache")
            .insert(key(p), f.clone());
        f
    }

    /// `exp(-4 pi alpha G(., p))` in the factorized form `d^{2 alpha W(d)} exp(-4 pi alpha S)`.
    pub fn vortex_factor_field(&self, p: Point, alpha: f64) -> PeriodicField {
        let s = self.remainder_shifted(p);
        let grid = self.grid;
        let vals = s
            .values()
            .iter()
            .enumerate()
            .map(|(idx, &sv)| {
                let d = torus_dist(grid.node_at(idx), p);
                self.vortex_factor_from(d, sv, alpha)
            })
            .collect();
        PeriodicField::from_vec(grid, vals)
    }

    /// Pointwise `exp(-4 pi alpha G(x, p))`.
    pub fn vortex_factor(&self, x: Point, p: Point, alpha: f64) -> f64 {
        let y = torus_disp(x, p);
        self.vortex_factor_from(norm(y), self.remainder_at(y), alpha)
    }

    fn vortex_factor_from(&self, d: f64, s: f64, alpha: f64) -> f64 {
        if d == 0.0 {
            return 0.0;
        }
        let w = self.window.eval(d)[0];
        d.powf(2.0 * alpha * w) * (-4.0 * PI * alpha * s).exp()
    }
}

/// The two vortices at `t e` and `-t e`, each of strength `4 pi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollapsePair {
    t: f64,
    e: Point,
}

impl CollapsePair {
    pub fn new(t: f64, e: Point) -> Result<Self> {
        if !(t > 0.0 && t < 0.5) || !t.is_finite() {
            return Err(Error::OutOfRange(format!("collapse parameter t = {t}")));
        }
        let len = norm(e);
        if (len - 1.0).abs() > 1e-12 {
            return Err(Error::OutOfRange(format!("|e| = {len}, expected 1")));
        }
        Ok(CollapsePair { t, e })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn e(&self) -> Point {
        self.e
    }

    /// Source locations `t e` and `-t e`, as points in `[0, 1)^2`.
    pub fn sources(&self) -> [Point; 2] {
        let w = crate::geom::wrap_point;
        [
            w([self.t * self.e[0], self.t * self.e[1]]),
            w([-self.t * self.e[0], -self.t * self.e[1]]),
        ]
    }
}

/// `G_t = 4 pi G(., t e) + 4 pi G(., -t e)`.
pub fn collapse_potential(green: &GreenEvaluator, pair: &CollapsePair) -> PeriodicField {
    let [a, b] = pair.sources();
    green
        .green_field(a)
        .add(&green.green_field(b))
        .scale(4.0 * PI)
}

/// `R_t = 4 pi R(., t e) + 4 pi R(., -t e)`.
pub fn collapse_regular(green: &GreenEvaluator, pair: &CollapsePair) -> PeriodicField {
    let [a, b] = pair.sources();
    green
        .regular_field(a)
        .add(&green.regular_field(b))
        .scale(4.0 * PI)
}

/// Pointwise `R_t(x)`.
pub fn collapse_regular_at(green: &GreenEvaluator, pair: &CollapsePair, x: Point) -> f64 {
    let [a, b] = pair.sources();
    4.0 * PI * (green.regular_part(x, a) + green.regular_part(x, b))
}

/// `exp(-G_t) = d(x, t e)^2 d(x, -t e)^2 exp(-R_t)`.
pub fn singular_weight(green: &GreenEvaluator, pair: &CollapsePair) -> PeriodicField {
    let [a, b] = pair.sources();
    let rt = collapse_regular(green, pair);
    let grid = green.grid();
    let vals = rt
        .values()
        .iter()
        .enumerate()
        .map(|(idx, &r)| {
            let x = grid.node_at(idx);
            let da = torus_dist(x, a);
            let db = torus_dist(x, b);
            da * da * db * db * (-r).exp()
        })
        .collect();
    PeriodicField::from_vec(grid, vals)
}

/// Pointwise `exp(-G_t(x))` in factorized form.
pub fn singular_weight_at(green: &GreenEvaluator, pair: &CollapsePair, x: Point) -> f64 {
    let [a, b] = pair.sources();
    let da = torus_dist(x, a);
    let db = torus_dist(x, b);
    da * da * db * db * (-collapse_regular_at(green, pair, x)).exp()
}

/// Self-consistency of a [`GreenEvaluator`] on a fixed set of points.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct GreenCheck {
    pub grid_n: usize,
    pub robin: f64,
    /// Continuum mean of `G(., 0)`: trapezoid mean of the remainder plus the
    /// exact integral of the windowed logarithm.
    pub mean: f64,
    /// Largest `|G(x, p) - G(p, x)|`.
    pub symmetry: f64,
    /// Largest `|G(x, p) - G(x - p, 0)|` with `G(., p)` sampled on the grid.
    pub translation: f64,
    /// Largest `|R(p, p) - R(0, 0)|`.
    pub robin_spread: f64,
}

fn check_points(count: usize) -> Vec<Point> {
    // Additive recurrence with the plastic-number constants.
    let (a1, a2) = (0.754_877_666_246_692_7, 0.569_840_290_998_053_3);
    (1..=count)
        .map(|k| {
            let k = k as f64;
            [(0.5 + a1 * k).fract(), (0.5 + a2 * k).fract()]
        })
        .collect()
}

pub fn green_self_check(g: &GreenEvaluator) -> GreenCheck {
    let pts = check_points(24);
    let mut symmetry = 0.0f64;
    let mut translation = 0.0f64;
    let mut robin_spread = 0.0f64;
    for w in pts.chunks(3) {
        let (x, p, s) = (w[0], w[1], w[2]);
        symmetry = symmetry.max((g.green(x, p) - g.green(p, x)).abs());
        let field = g.green_field(p);
        let n = g.grid().n();
        for idx in [(s[0] * n as f64) as usize * n + (s[1] * n as f64) as usize, n + 3] {
            let node = g.grid().node_at(idx);
            let y = crate::geom::wrap_point([node[0] - p[0], node[1] - p[1]]);
            translation = translation.max((field.values()[idx] - g.green(y, [0.0, 0.0])).abs());
        }
        robin_spread = robin_spread.max((g.regular_part(p, p) - g.robin()).abs());
    }
    GreenCheck {
        grid_n: g.grid().n(),
        robin: g.robin(),
        mean: g.remainder_field.mean() + g.log_integral,
        symmetry,
        translation,
        robin_spread,
    }
}
