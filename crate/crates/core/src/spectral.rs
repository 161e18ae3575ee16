//! Uniform grids on the flat unit torus and Fourier-spectral operators.
//!
//! Samples are stored row-major: `values[i * n + j]` is the value at the node
//! `(i / n, j / n)`. Spectral coefficients are normalized so that the `k = 0`
//! coefficient equals the field mean.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::geom::Point;

/// Uniform `n x n` grid on the unit torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n % 2 != 0 {
            return Err(Error::InvalidGrid("n must be even".into()));
        }
        if n < 16 {
            return Err(Error::InvalidGrid(format!("n must be at least 16, got {n}")));
        }
        Ok(Grid { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Number of samples, `n * n`.
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        let h = self.spacing();
        [i as f64 * h, j as f64 * h]
    }

    /// Node coordinates of the flat index `idx`.
    pub fn node_at(&self, idx: usize) -> Point {
        self.node(idx / self.n, idx % self.n)
    }

    /// Signed integer wave number of axis index `i`, in `[-n/2, n/2)`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self.n != other.n {
            return Err(Error::GridMismatch(self.n, other.n));
        }
        Ok(())
    }
}

/// Validating constructor mirroring [`Grid::new`].
pub fn make_grid(n: usize) -> Result<Grid> {
    Grid::new(n)
}

/// Real field sampled on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicField {
    grid: Grid,
    values: Vec<f64>,
}

impl PeriodicField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "non-finite sample at index {idx}"
            )));
        }
        Ok(PeriodicField { grid, values })
    }

    /// Wraps samples that the caller guarantees are finite and correctly sized.
    pub(crate) fn from_vec(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        PeriodicField { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        PeriodicField {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.len()).map(|idx| f(grid.node_at(idx))).collect();
        PeriodicField { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n + j]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        PeriodicField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        PeriodicField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Self) {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    pub fn add_constant(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    /// Copy with the mean removed.
    pub fn mean_free(&self) -> Self {
        self.add_constant(-self.mean())
    }

    /// Grid inner product `integrate(self * other)`.
    pub fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / self.values.len() as f64
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Fourier coefficients of a real field.
///
/// Only the half plane `k2 >= 0` is stored; the rest follows from conjugate
/// symmetry. Storage is `coeffs[k2 * n + i]` with `i` the axis-0 index.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

struct Plans {
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut real = RealFftPlanner::<f64>::new();
            let mut complex = FftPlanner::<f64>::new();
            Arc::new(Plans {
                r2c: real.plan_fft_forward(n),
                c2r: real.plan_fft_inverse(n),
                fwd: complex.plan_fft_forward(n),
                inv: complex.plan_fft_inverse(n),
            })
        })
        .clone()
}

impl SpectralField {
    pub fn forward(f: &PeriodicField) -> Self {
        let grid = f.grid;
        let n = grid.n;
        let m = n / 2 + 1;
        let p = plans(n);
        let mut rows = vec![Complex64::new(0.0, 0.0); n * m];
        let mut line = vec![0.0; n];
        let mut scratch = p.r2c.make_scratch_vec();
        for i in 0..n {
            line.copy_from_slice(&f.values[i * n..(i + 1) * n]);
            p.r2c
                .process_with_scratch(&mut line, &mut rows[i * m..(i + 1) * m], &mut scratch)
                .expect("r2c buffer sizes");
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n * m];
        for i in 0..n {
            for j in 0..m {
                coeffs[j * n + i] = rows[i * m + j];
            }
        }
        let mut cscratch = vec![Complex64::new(0.0, 0.0); p.fwd.get_inplace_scratch_len()];
        p.fwd.process_with_scratch(&mut coeffs, &mut cscratch);
        let norm = 1.0 / (n * n) as f64;
        for c in &mut coeffs {
            *c *= norm;
        }
        SpectralField { grid, coeffs }
    }

    pub fn inverse(&self) -> PeriodicField {
        let n = self.grid.n;
        let m = n / 2 + 1;
        let p = plans(n);
        let mut cols = self.coeffs.clone();
        let mut cscratch = vec![Complex64::new(0.0, 0.0); p.inv.get_inplace_scratch_len()];
        p.inv.process_with_scratch(&mut cols, &mut cscratch);
        let mut rows = vec![Complex64::new(0.0, 0.0); m];
        let mut values = vec![0.0; n * n];
        let mut scratch = p.c2r.make_scratch_vec();
        for i in 0..n {
            for j in 0..m {
                rows[j] = cols[j * n + i];
            }
            rows[0].im = 0.0;
            rows[m - 1].im = 0.0;
            p.c2r
                .process_with_scratch(&mut rows, &mut values[i * n..(i + 1) * n], &mut scratch)
                .expect("c2r buffer sizes");
        }
        PeriodicField::from_vec(self.grid, values)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Coefficient at wave vector `(k1, k2)` with both in `[-n/2, n/2)`.
    pub fn coeff(&self, k1: i64, k2: i64) -> Complex64 {
        let n = self.grid.n as i64;
        let idx = |k: i64| k.rem_euclid(n) as usize;
        if k2 >= 0 || k2 == -n / 2 {
            self.coeffs[(k2.unsigned_abs() as usize) * self.grid.n + idx(k1)]
        } else {
            self.coeffs[((-k2) as usize) * self.grid.n + idx(-k1)].conj()
        }
    }

    /// Multiplies each coefficient by `mult(k1, k2)`; `k2` ranges over `0..=n/2`.
    pub fn map_modes(&self, mult: impl Fn(i64, i64) -> f64) -> Self {
        let n = self.grid.n;
        let mut coeffs = self.coeffs.clone();
        for (j, col) in coeffs.chunks_mut(n).enumerate() {
            for (i, c) in col.iter_mut().enumerate() {
                *c *= mult(self.grid.wavenumber(i), j as i64);
            }
        }
        SpectralField {
            grid: self.grid,
            coeffs,
        }
    }

    pub fn laplacian(&self) -> Self {
        self.map_modes(|k1, k2| -4.0 * PI * PI * ((k1 * k1 + k2 * k2) as f64))
    }

    /// Applies `(-Laplacian)^{-1}` on the mean-free part; the mean is dropped.
    pub fn inverse_neg_laplacian(&self) -> Self {
        self.map_modes(|k1, k2| {
            let k2sum = (k1 * k1 + k2 * k2) as f64;
            if k2sum == 0.0 {
                0.0
            } else {
                1.0 / (4.0 * PI * PI * k2sum)
            }
        })
    }

    /// Coefficients of `x -> f(x - p)`, consistent with [`interpolate`].
    pub fn translate(&self, p: Point) -> Self {
        let n = self.grid.n;
        let half = (n / 2) as i64;
        let axis = |k: i64, x: f64| -> Complex64 {
            if k == -half || k == half {
                Complex64::new((PI * n as f64 * x).cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, -2.0 * PI * k as f64 * x)
            }
        };
        let f1: Vec<Complex64> = (0..n).map(|i| axis(self.grid.wavenumber(i), p[0])).collect();
        let mut coeffs = self.coeffs.clone();
        for (j, col) in coeffs.chunks_mut(n).enumerate() {
            let a2 = axis(j as i64, p[1]);
            for (c, a1) in col.iter_mut().zip(&f1) {
                *c *= a1 * a2;
            }
        }
        SpectralField {
            grid: self.grid,
            coeffs,
        }
    }

    /// Spectral inner product, equal to the grid mean of the product of the
    /// two real fields.
    pub fn dot(&self, other: &Self) -> f64 {
        let n = self.grid.n;
        let m = n / 2 + 1;
        let mut sum = 0.0;
        for j in 0..m {
            let w = if j == 0 || j == m - 1 { 1.0 } else { 2.0 };
            let a = &self.coeffs[j * n..(j + 1) * n];
            let b = &other.coeffs[j * n..(j + 1) * n];
            let s: f64 = a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum();
            sum += w * s;
        }
        sum
    }

    /// Dirichlet energy `integrate(|grad u|^2)` paired between two fields.
    pub fn energy_dot(&self, other: &Self) -> f64 {
        let n = self.grid.n;
        let m = n / 2 + 1;
        let mut sum = 0.0;
        for j in 0..m {
            let w = if j == 0 || j == m - 1 { 1.0 } else { 2.0 };
            let a = &self.coeffs[j * n..(j + 1) * n];
            let b = &other.coeffs[j * n..(j + 1) * n];
            let kj = (j * j) as f64;
            let mut s = 0.0;
            for (i, (x, y)) in a.iter().zip(b).enumerate() {
                let k1 = self.grid.wavenumber(i) as f64;
                s += (k1 * k1 + kj) * (x.re * y.re + x.im * y.im);
            }
            sum += w * s;
        }
        4.0 * PI * PI * sum
    }

    pub fn zeros(grid: Grid) -> Self {
        SpectralField {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); (grid.n / 2 + 1) * grid.n],
        }
    }

    pub fn axpy(&mut self, c: f64, other: &Self) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * c;
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|z| z * c).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn set_mean(&mut self, c: f64) {
        self.coeffs[0] = Complex64::new(c, 0.0);
    }

    /// Trigonometric interpolant evaluated at `x`.
    pub fn eval(&self, x: Point) -> f64 {
        let n = self.grid.n;
        let m = n / 2 + 1;
        let half = (n / 2) as i64;
        let phi1: Vec<Complex64> = (0..n)
            .map(|i| {
                let k = self.grid.wavenumber(i);
                if k == -half {
                    Complex64::new((PI * n as f64 * x[0]).cos(), 0.0)
                } else {
                    Complex64::from_polar(1.0, 2.0 * PI * k as f64 * x[0])
                }
            })
            .collect();
        let mut total = 0.0;
        for j in 0..m {
            let col = &self.coeffs[j * n..(j + 1) * n];
            let a: Complex64 = col.iter().zip(&phi1).map(|(c, p)| c * p).sum();
            let term = if j == 0 {
                a.re
            } else if j == m - 1 {
                a.re * (PI * n as f64 * x[1]).cos()
            } else {
                2.0 * (a * Complex64::from_polar(1.0, 2.0 * PI * j as f64 * x[1])).re
            };
            total += term;
        }
        total
    }
}

/// Spectral Laplacian.
pub fn laplacian(f: &PeriodicField) -> PeriodicField {
    SpectralField::forward(f).laplacian().inverse()
}

/// Solves `-Laplacian u = rhs` for mean-zero `u`.
/// Max-norm error of the spectral Laplacian of `f` from rounding alone.
pub fn laplacian_roundoff(f: &PeriodicField) -> f64 {
    let kmax = PI * f.grid().n() as f64;
    10.0 * f64::EPSILON * kmax * kmax * (1.0 + f.max_abs())
}

pub fn solve_poisson_meanzero(rhs: &PeriodicField, mean_tol: f64) -> Result<PeriodicField> {
    let mean = rhs.mean();
    if mean.abs() >= mean_tol {
        return Err(Error::NonZeroMean { mean, tol: mean_tol });
    }
    Ok(SpectralField::forward(rhs).inverse_neg_laplacian().inverse())
}

/// Uniform-grid quadrature over the torus (the sample mean).
pub fn integrate(f: &PeriodicField) -> f64 {
    f.mean()
}

/// Fourier interpolation at an arbitrary point.
pub fn interpolate(f: &PeriodicField, x: Point) -> f64 {
    SpectralField::forward(f).eval(x)
}

/// Checks two fields share a grid.
pub fn same_grid(a: &PeriodicField, b: &PeriodicField) -> Result<()> {
    a.grid.check_same(&b.grid)
}
