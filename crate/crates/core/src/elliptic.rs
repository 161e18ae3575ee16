//! Linearized mean-field operators and their bordered (saddle-point) solves.
//!
//! All operators have the form `phi -> Laplacian phi + k f (phi - integrate(f phi))`
//! with `f` a probability density on the torus. They are symmetric in the grid
//! inner product and map mean-zero fields to mean-zero fields.

use crate::error::{Error, Result};
use crate::krylov::{minres, KrylovSpace};
use crate::spectral::{laplacian_roundoff, PeriodicField, SpectralField};

/// `phi -> Laplacian phi + coef * f * (phi - integrate(f phi))`.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    coef: f64,
    density: PeriodicField,
}

impl DensityOperator {
    /// `weight` is any non-negative field; it is normalized to unit mass.
    pub fn new(coef: f64, weight: &PeriodicField) -> Self {
        let mass = weight.mean();
        DensityOperator {
            coef,
            density: weight.scale(1.0 / mass),
        }
    }

    pub fn coef(&self) -> f64 {
        self.coef
    }

    /// The normalized density `f`.
    pub fn density(&self) -> &PeriodicField {
        &self.density
    }

    /// The zeroth-order part `coef f (phi - integrate(f phi))`.
    pub fn potential(&self, phi: &PeriodicField) -> PeriodicField {
        let avg = self.density.dot(phi);
        let k = self.coef;
        self.density.zip_map(phi, |f, p| k * f * (p - avg))
    }

    pub fn apply(&self, phi: &PeriodicField) -> PeriodicField {
        let lap = SpectralField::forward(phi).laplacian().inverse();
        lap.add(&self.potential(phi))
    }
}

/// Krylov vector: a mean-zero field in spectral form and `K` multipliers.
#[derive(Clone, Debug)]
pub struct Bordered<const K: usize> {
    pub phi: SpectralField,
    pub c: [f64; K],
}

/// Energy inner product on the field part, weighted Euclidean on multipliers.
pub struct EnergySpace<const K: usize> {
    c_weight: f64,
}

impl<const K: usize> KrylovSpace for EnergySpace<K> {
    type Vector = Bordered<K>;

    fn dot(&self, a: &Bordered<K>, b: &Bordered<K>) -> f64 {
        let c: f64 = a.c.iter().zip(&b.c).map(|(x, y)| x * y).sum();
        a.phi.energy_dot(&b.phi) + self.c_weight * c
    }

    fn axpy(&self, y: &mut Bordered<K>, a: f64, x: &Bordered<K>) {
        y.phi.axpy(a, &x.phi);
        for (yi, xi) in y.c.iter_mut().zip(&x.c) {
            *yi += a * xi;
        }
    }

    fn scale(&self, x: &mut Bordered<K>, a: f64) {
        x.phi = x.phi.scale(a);
        for xi in x.c.iter_mut() {
            *xi *= a;
        }
    }

    fn zero_like(&self, x: &Bordered<K>) -> Bordered<K> {
        Bordered {
            phi: SpectralField::zeros(x.phi.grid()),
            c: [0.0; K],
        }
    }
}

/// Tolerances for [`SaddleSolver::solve`].
#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Target max-norm of the equation residual; a residual that stalls
    /// below the rounding floor of the Laplacian is accepted.
    pub residual_tol: f64,
    /// Relative tolerance of each MINRES pass.
    pub krylov_rtol: f64,
    pub max_iter: usize,
    /// Number of iterative-refinement passes.
    pub max_passes: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            residual_tol: 1e-9,
            krylov_rtol: 1e-11,
            max_iter: 2000,
            max_passes: 6,
        }
    }
}

/// Solution of the bordered system.
#[derive(Clone, Debug)]
pub struct SaddleSolution<const K: usize> {
    pub phi: PeriodicField,
    pub c: [f64; K],
    pub iterations: usize,
    /// Max-norm of `L phi - sum c_i Z_i - g`.
    pub residual: f64,
    /// Largest `|integrate(phi Z_i)|`.
    pub constraint: f64,
}

/// Solves `L phi = g + sum c_i Z_i`, `integrate(phi Z_i) = 0`, `integrate(phi) = 0`.
pub struct SaddleSolver<'a, const K: usize> {
    op: &'a DensityOperator,
    z: [PeriodicField; K],
    zeta: [SpectralField; K],
    scale: f64,
}

impl<'a, const K: usize> SaddleSolver<'a, K> {
    /// The constraint fields `z` must have zero mean.
    pub fn new(op: &'a DensityOperator, z: [PeriodicField; K]) -> Result<Self> {
        for zi in &z {
            let m = zi.mean();
            if m.abs() > 1e-9 * (1.0 + zi.max_abs()) {
                return Err(Error::NonZeroMean { mean: m, tol: 1e-9 });
            }
        }
        let zeta: [SpectralField; K] =
            std::array::from_fn(|i| SpectralField::forward(&z[i]).inverse_neg_laplacian());
        let energy: f64 = zeta.iter().map(|s| s.energy_dot(s)).sum::<f64>() / K.max(1) as f64;
        let scale = if K == 0 || energy == 0.0 { 1.0 } else { 1.0 / energy };
        Ok(SaddleSolver {
            op,
            z,
            zeta,
            scale,
        })
    }

    pub fn constraints(&self) -> &[PeriodicField; K] {
        &self.z
    }

    fn apply_preconditioned(&self, x: &Bordered<K>) -> Bordered<K> {
        let phys = x.phi.inverse();
        let pot = SpectralField::forward(&self.op.potential(&phys)).inverse_neg_laplacian();
        let mut phi = pot;
        let mut minus_x = x.phi.scale(-1.0);
        minus_x.set_mean(0.0);
        phi.axpy(1.0, &minus_x);
        for (ci, zeta) in x.c.iter().zip(&self.zeta) {
            phi.axpy(-ci, zeta);
        }
        let c = std::array::from_fn(|i| -self.scale * x.phi.energy_dot(&self.zeta[i]));
        Bordered { phi, c }
    }

    /// Residual field `g + sum c_i Z_i - L phi` and the constraint values.
    pub fn residual(
        &self,
        phi: &PeriodicField,
        c: &[f64; K],
        g: &PeriodicField,
    ) -> (PeriodicField, [f64; K]) {
        let mut r = g.sub(&self.op.apply(phi));
        for (ci, zi) in c.iter().zip(&self.z) {
            r.axpy(*ci, zi);
        }
        let cons = std::array::from_fn(|i| phi.dot(&self.z[i]));
        (r, cons)
    }

    /// One MINRES pass from zero with no residual check; used where the
    /// operator may be nearly singular (inverse iteration).
    pub fn solve_single_pass(
        &self,
        g: &PeriodicField,
        rtol: f64,
        max_iter: usize,
    ) -> (PeriodicField, [f64; K]) {
        let space = EnergySpace::<K> {
            c_weight: 1.0 / self.scale,
        };
        let mut rhs_phi = SpectralField::forward(g).inverse_neg_laplacian();
        rhs_phi.set_mean(0.0);
        let rhs = Bordered {
            phi: rhs_phi,
            c: [0.0; K],
        };
        let out = minres(
            &space,
            |x| self.apply_preconditioned(x),
            &rhs,
            None,
            rtol,
            max_iter,
        );
        (out.x.phi.inverse(), out.x.c)
    }

    pub fn solve(
        &self,
        g: &PeriodicField,
        guess: Option<(&PeriodicField, [f64; K])>,
        opts: &SolveOptions,
    ) -> Result<SaddleSolution<K>> {
        let grid = g.grid();
        let space = EnergySpace::<K> {
            c_weight: 1.0 / self.scale,
        };
        let (mut phi, mut c) = match guess {
            Some((p, c)) => (p.mean_free(), c),
            None => (PeriodicField::zeros(grid), [0.0; K]),
        };
        let mut iterations = 0;
        let mut passes = 0;
        let mut last = f64::INFINITY;
        let (rmax, cmax) = loop {
            let (r, cons) = self.residual(&phi, &c, g);
            let rmax = r.max_abs();
            let cmax = cons.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if rmax < opts.residual_tol && cmax < opts.residual_tol {
                break (rmax, cmax);
            }
            // A pass that no longer helps below the rounding level of the
            // Laplacian is as good as this grid gets.
            if cmax < opts.residual_tol && rmax > 0.5 * last && rmax < laplacian_roundoff(&phi) {
                break (rmax, cmax);
            }
            last = rmax;
            if passes == opts.max_passes {
                return Err(Error::LinearNoConvergence {
                    iters: iterations,
                    residual: rmax.max(cmax),
                });
            }
            passes += 1;
            // Correction solve A d = (r, cons) in preconditioned form.
            let mut rhs_phi = SpectralField::forward(&r).inverse_neg_laplacian();
            rhs_phi.set_mean(0.0);
            let rhs = Bordered {
                phi: rhs_phi,
                c: std::array::from_fn(|i| self.scale * cons[i]),
            };
            let out = minres(
                &space,
                |x| self.apply_preconditioned(x),
                &rhs,
                None,
                opts.krylov_rtol,
                opts.max_iter,
            );
            iterations += out.iterations;
            if !out.converged && out.relative_residual > 1e-3 {
                return Err(Error::LinearNoConvergence {
                    iters: iterations,
                    residual: out.relative_residual,
                });
            }
            phi.axpy(1.0, &out.x.phi.inverse());
            for (ci, di) in c.iter_mut().zip(&out.x.c) {
                *ci += di;
            }
        };
        Ok(SaddleSolution {
            phi,
            c,
            iterations,
            residual: rmax,
            constraint: cmax,
        })
    }
}
