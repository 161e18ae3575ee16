//! One-dimensional quadrature helpers built on the `quadrature` and
//! `gauss-quad` crates.

use gauss_quad::GaussLegendre;

/// Result of a quadrature with its error estimate.
#[derive(Clone, Copy, Debug)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Tanh-sinh quadrature on `[a, b]`; tolerates integrable endpoint singularities.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Estimate {
    if a == b {
        return Estimate { value: 0.0, error: 0.0 };
    }
    let out = quadrature::double_exponential::integrate(f, a, b, tol);
    Estimate {
        value: out.integral,
        error: out.error_estimate,
    }
}

/// Panel breakpoints `0, r0, 2 r0, 4 r0, ...` up to `r_max`.
pub fn geometric_breaks(r0: f64, r_max: f64) -> Vec<f64> {
    let mut breaks = vec![0.0];
    let mut r = r0.min(r_max);
    loop {
        breaks.push(r);
        if r >= r_max {
            break;
        }
        r = (2.0 * r).min(r_max);
    }
    breaks
}

/// Tanh-sinh on each panel between consecutive breakpoints.
pub fn panels_tanh_sinh(f: impl Fn(f64) -> f64, breaks: &[f64], tol: f64) -> Estimate {
    let mut value = 0.0;
    let mut error = 0.0;
    for w in breaks.windows(2) {
        let e = tanh_sinh(&f, w[0], w[1], tol);
        value += e.value;
        error += e.error;
    }
    Estimate { value, error }
}

/// Composite Gauss-Legendre rule: `sub` equal pieces per panel, degree `deg`.
pub fn panels_gauss_legendre(
    f: impl Fn(f64) -> f64,
    breaks: &[f64],
    sub: usize,
    deg: usize,
) -> f64 {
    let rule = GaussLegendre::new(deg).expect("valid Gauss-Legendre degree");
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let step = (w[1] - w[0]) / sub as f64;
        for s in 0..sub {
            let a = w[0] + s as f64 * step;
            total += rule.integrate(a, a + step, &f);
        }
    }
    total
}
