//! Points and distances on the unit torus.

pub type Point = [f64; 2];

/// Wraps a coordinate into `[0, 1)`.
pub fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

pub fn wrap_point(x: Point) -> Point {
    [wrap(x[0]), wrap(x[1])]
}

/// Shortest displacement `x - p` over the lattice images, each component in `[-1/2, 1/2)`.
pub fn torus_disp(x: Point, p: Point) -> Point {
    let w = |d: f64| d - (d + 0.5).floor();
    [w(x[0] - p[0]), w(x[1] - p[1])]
}

/// Torus distance: the minimum Euclidean distance over the nine nearest images.
pub fn torus_dist(x: Point, p: Point) -> f64 {
    norm(torus_disp(x, p))
}

pub fn norm(v: Point) -> f64 {
    v[0].hypot(v[1])
}

pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn scale(c: f64, a: Point) -> Point {
    [c * a[0], c * a[1]]
}
