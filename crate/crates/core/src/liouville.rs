//! Entire solutions of `Delta v + e^v = 0` on the plane, the kernels of the
//! linearized operator, the test functions used in the kernel-mass estimates,
//! and radial quadrature with exact tails.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::quad;

/// `v(z) = ln(8 e^mu / (1 + e^mu |z + a|^2)^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntireBubble {
    pub mu: f64,
    pub a: Point,
}

pub fn bubble_value(b: &EntireBubble, z: Point) -> f64 {
    let s = (z[0] + b.a[0]).powi(2) + (z[1] + b.a[1]).powi(2);
    (8.0f64).ln() + b.mu - 2.0 * (b.mu.exp() * s).ln_1p()
}

/// One of the three bounded kernels: dilation (0) or translations (1, 2).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KernelIndex(u8);

impl KernelIndex {
    pub const DILATION: KernelIndex = KernelIndex(0);
    pub const X1: KernelIndex = KernelIndex(1);
    pub const X2: KernelIndex = KernelIndex(2);

    pub fn new(i: u8) -> Result<Self> {
        if i > 2 {
            return Err(Error::OutOfRange(format!("kernel index {i}")));
        }
        Ok(KernelIndex(i))
    }

    pub fn index(&self) -> usize {
        self.0 as usize
    }
}

fn r2(z: Point) -> f64 {
    z[0] * z[0] + z[1] * z[1]
}

pub fn kernel_value(i: KernelIndex, z: Point) -> f64 {
    let s = r2(z);
    match i.0 {
        0 => (1.0 - s) / (1.0 + s),
        k => z[k as usize - 1] / (1.0 + s),
    }
}

/// Closed-form gradient of a kernel.
pub fn kernel_gradient(i: KernelIndex, z: Point) -> Point {
    let s = r2(z);
    let d2 = (1.0 + s) * (1.0 + s);
    match i.0 {
        0 => [-4.0 * z[0] / d2, -4.0 * z[1] / d2],
        k => {
            let a = k as usize - 1;
            let b = 1 - a;
            let mut g = [0.0; 2];
            g[a] = (1.0 + z[b] * z[b] - z[a] * z[a]) / d2;
            g[b] = -2.0 * z[a] * z[b] / d2;
            g
        }
    }
}

/// Closed-form Laplacian of a kernel.
pub fn kernel_laplacian(i: KernelIndex, z: Point) -> f64 {
    let s = r2(z);
    let d3 = (1.0 + s).powi(3);
    match i.0 {
        0 => 8.0 * (s - 1.0) / d3,
        k => -8.0 * z[k as usize - 1] / d3,
    }
}

/// `eta_1 = -Y_0 - 1 = -2 / (1 + |z|^2)`.
pub fn test_eta1(z: Point) -> f64 {
    -2.0 / (1.0 + r2(z))
}

/// `eta_2 = (4/3) ln(1 + |z|^2) Y_0 + 8 / (3 (1 + |z|^2))`.
pub fn test_eta2(z: Point) -> f64 {
    let s = r2(z);
    4.0 / 3.0 * s.ln_1p() * (1.0 - s) / (1.0 + s) + 8.0 / (3.0 * (1.0 + s))
}

/// `rho(z) = (1 + |z|)^{-1 - alpha/2}`.
pub fn weight_rho(z: Point, alpha: f64) -> f64 {
    (1.0 + r2(z).sqrt()).powf(-1.0 - alpha / 2.0)
}

/// Registered radial integrands; each value is a plane integral written as
/// `int_0^R g(r) dr` with the angular factor included.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RadialIntegrand {
    /// `8 / (1 + |z|^2)^2`, total `8 pi`.
    Mass,
    /// `Y_0 / (1 + |z|^2)^2`, total 0.
    Y0Weight,
    /// `|grad Y_1|^2 + 8 Y_1^2 / (1 + |z|^2)^2`, total `4 pi / 3`.
    KernelEnergy,
    /// `rho(z)^2` with the given alpha.
    RhoWeight(f64),
}

impl fmt::Display for RadialIntegrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialIntegrand::Mass => write!(f, "mass"),
            RadialIntegrand::Y0Weight => write!(f, "y0_weight"),
            RadialIntegrand::KernelEnergy => write!(f, "kernel_energy"),
            RadialIntegrand::RhoWeight(a) => write!(f, "rho_weight:{a}"),
        }
    }
}

impl FromStr for RadialIntegrand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mass" => Ok(RadialIntegrand::Mass),
            "y0_weight" => Ok(RadialIntegrand::Y0Weight),
            "kernel_energy" => Ok(RadialIntegrand::KernelEnergy),
            _ => {
                if let Some(a) = s.strip_prefix("rho_weight:") {
                    let alpha: f64 = a
                        .parse()
                        .map_err(|_| Error::UnknownIntegrand(s.to_string()))?;
                    if alpha > 0.0 {
                        return Ok(RadialIntegrand::RhoWeight(alpha));
                    }
                }
                Err(Error::UnknownIntegrand(s.to_string()))
            }
        }
    }
}

impl RadialIntegrand {
    /// Integrand in `r`, including the `2 pi r` (or angular-average) factor.
    pub fn density(&self, r: f64) -> f64 {
        let s = r * r;
        match *self {
            RadialIntegrand::Mass => 2.0 * PI * r * 8.0 / ((1.0 + s) * (1.0 + s)),
            RadialIntegrand::Y0Weight => 2.0 * PI * r * (1.0 - s) / (1.0 + s).powi(3),
            RadialIntegrand::KernelEnergy => {
                let f2 = s / ((1.0 + s) * (1.0 + s));
                let fp = (1.0 - s) / ((1.0 + s) * (1.0 + s));
                let inv = 1.0 / ((1.0 + s) * (1.0 + s));
                PI * r * (fp * fp + inv + 8.0 * f2 * inv)
            }
            RadialIntegrand::RhoWeight(alpha) => 2.0 * PI * r * (1.0 + r).powf(-2.0 - alpha),
        }
    }

    /// Exact value of the integral over `[r, inf)`.
    pub fn tail(&self, r: f64) -> f64 {
        let u = r * r;
        match *self {
            RadialIntegrand::Mass => 8.0 * PI / (1.0 + u),
            RadialIntegrand::Y0Weight => -PI * u / ((1.0 + u) * (1.0 + u)),
            RadialIntegrand::KernelEnergy => {
                let v = 1.0 + u;
                PI / 2.0 * (2.0 / v + 4.0 * (v.powi(-2) / 2.0 - v.powi(-3) / 3.0))
            }
            RadialIntegrand::RhoWeight(alpha) => {
                2.0 * PI
                    * ((1.0 + r).powf(-alpha) / alpha - (1.0 + r).powf(-1.0 - alpha) / (1.0 + alpha))
            }
        }
    }
}

/// Output of [`radial_integral`].
#[derive(Clone, Copy, Debug)]
pub struct RadialIntegral {
    /// Integral over `[0, r_max]`.
    pub truncated: f64,
    /// Exact tail over `[r_max, inf)`.
    pub tail: f64,
    /// Quadrature error estimate.
    pub error: f64,
}

impl RadialIntegral {
    pub fn total(&self) -> f64 {
        self.truncated + self.tail
    }
}

/// Adaptive tanh-sinh quadrature on geometric panels of `[0, r_max]`.
pub fn radial_integral(name: &str, r_max: f64) -> Result<RadialIntegral> {
    let f: RadialIntegrand = name.parse()?;
    Ok(integrate_radial(f, r_max))
}

pub fn integrate_radial(f: RadialIntegrand, r_max: f64) -> RadialIntegral {
    let breaks = quad::geometric_breaks(0.25, r_max);
    let est = quad::panels_tanh_sinh(|r| f.density(r), &breaks, 1e-13);
    RadialIntegral {
        truncated: est.value,
        tail: f.tail(r_max),
        error: est.error,
    }
}

/// Independent composite Gauss-Legendre evaluation of the truncated integral.
pub fn integrate_radial_gauss(f: RadialIntegrand, r_max: f64) -> f64 {
    let breaks = quad::geometric_breaks(0.25, r_max);
    quad::panels_gauss_legendre(|r| f.density(r), &breaks, 4, 40)
}
