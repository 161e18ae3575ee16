//! MINRES for self-adjoint operators in a caller-supplied inner product.
//!
//! The elliptic solves run MINRES on `P A` where `P` is the inverse Laplacian;
//! that operator is self-adjoint in the energy inner product, so the
//! preconditioner never has to be applied separately.

/// Vector-space operations over the Krylov vectors.
pub trait KrylovSpace {
    type Vector: Clone;

    fn dot(&self, a: &Self::Vector, b: &Self::Vector) -> f64;
    /// `y += a * x`.
    fn axpy(&self, y: &mut Self::Vector, a: f64, x: &Self::Vector);
    fn scale(&self, x: &mut Self::Vector, a: f64);
    fn zero_like(&self, x: &Self::Vector) -> Self::Vector;
}

#[derive(Clone, Debug)]
pub struct MinresOutcome<V> {
    pub x: V,
    pub iterations: usize,
    /// Residual norm divided by the right-hand-side norm, in the space's inner product.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` for self-adjoint `A`.
pub fn minres<S: KrylovSpace>(
    space: &S,
    mut apply: impl FnMut(&S::Vector) -> S::Vector,
    b: &S::Vector,
    x0: Option<S::Vector>,
    tol: f64,
    max_iter: usize,
) -> MinresOutcome<S::Vector> {
    let bnorm = space.dot(b, b).sqrt();
    let mut x = match x0 {
        Some(x) => x,
        None => space.zero_like(b),
    };
    if bnorm == 0.0 {
        return MinresOutcome {
            x: space.zero_like(b),
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut r1 = b.clone();
    {
        let ax = apply(&x);
        space.axpy(&mut r1, -1.0, &ax);
    }
    let beta1 = space.dot(&r1, &r1).sqrt();
    if beta1 <= tol * bnorm {
        return MinresOutcome {
            x,
            iterations: 0,
            relative_residual: beta1 / bnorm,
            converged: true,
        };
    }
    let mut r2 = r1.clone();
    let mut y = r1.clone();
    let mut w = space.zero_like(b);
    let mut w2 = space.zero_like(b);
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut rnorm = beta1;

    for itn in 1..=max_iter {
        let mut v = y.clone();
        space.scale(&mut v, 1.0 / beta);
        y = apply(&v);
        if itn >= 2 {
            space.axpy(&mut y, -beta / oldb, &r1);
        }
        let alfa = space.dot(&v, &y);
        space.axpy(&mut y, -alfa / beta, &r2);
        r1 = std::mem::replace(&mut r2, y.clone());
        oldb = beta;
        beta = space.dot(&r2, &r2).sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::MIN_POSITIVE);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        // w <- (v - oldeps w1 - delta w2) / gamma with (w1, w2) = (w2, w).
        let w1 = std::mem::replace(&mut w2, w.clone());
        let mut wn = v;
        space.axpy(&mut wn, -oldeps, &w1);
        space.axpy(&mut wn, -delta, &w2);
        space.scale(&mut wn, 1.0 / gamma);
        w = wn;
        space.axpy(&mut x, phi, &w);

        rnorm = phibar;
        if rnorm <= tol * bnorm || beta == 0.0 {
            return MinresOutcome {
                x,
                iterations: itn,
                relative_residual: rnorm / bnorm,
                converged: true,
            };
        }
    }
    MinresOutcome {
        x,
        iterations: max_iter,
        relative_residual: rnorm / bnorm,
        converged: false,
    }
}

/// Plain Euclidean space of `Vec<f64>`, used in tests and small problems.
pub struct Euclidean;

impl KrylovSpace for Euclidean {
    type Vector = Vec<f64>;

    fn dot(&self, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn axpy(&self, y: &mut Vec<f64>, a: f64, x: &Vec<f64>) {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += a * xi;
        }
    }

    fn scale(&self, x: &mut Vec<f64>, a: f64) {
        for xi in x.iter_mut() {
            *xi *= a;
        }
    }

    fn zero_like(&self, x: &Vec<f64>) -> Vec<f64> {
        vec![0.0; x.len()]
    }
}
