use std::f64::consts::PI;

use mfbubble::spectral::{
    integrate, interpolate, laplacian, make_grid, solve_poisson_meanzero, PeriodicField,
    SpectralField,
};
use mfbubble::Error;
use proptest::prelude::*;

fn grid(n: usize) -> mfbubble::spectral::Grid {
    make_grid(n).unwrap()
}

#[test]
fn grid_validation() {
    let g = grid(64);
    assert_eq!(g.n(), 64);
    assert_eq!(g.spacing() * 64.0, 1.0);
    assert!(matches!(make_grid(63), Err(Error::InvalidGrid(m)) if m.contains("even")));
    assert!(make_grid(14).is_err());
    assert_eq!(grid(1024).n(), 1024);
}

#[test]
fn laplacian_of_eigenfunctions() {
    let g = grid(64);
    let f = PeriodicField::from_fn(g, |x| (2.0 * PI * x[0]).cos());
    let lf = laplacian(&f);
    let expect = f.scale(-4.0 * PI * PI);
    assert!(lf.max_abs_diff(&expect) < 1e-10);

    let c = PeriodicField::constant(g, 3.5);
    assert!(laplacian(&c).max_abs() < 1e-12);

    let f = PeriodicField::from_fn(g, |x| (2.0 * PI * x[0]).cos() * (4.0 * PI * x[1]).cos());
    let expect = f.scale(-20.0 * PI * PI);
    assert!(laplacian(&f).max_abs_diff(&expect) < 1e-9);
}

#[test]
fn poisson_solve() {
    let g = grid(64);
    let rhs = PeriodicField::from_fn(g, |x| (2.0 * PI * x[0]).cos());
    let u = solve_poisson_meanzero(&rhs, 1e-10).unwrap();
    let expect = rhs.scale(1.0 / (4.0 * PI * PI));
    assert!(u.max_abs_diff(&expect) < 1e-14);

    let zero = PeriodicField::zeros(g);
    assert_eq!(solve_poisson_meanzero(&zero, 1e-10).unwrap().max_abs(), 0.0);

    let one = PeriodicField::constant(g, 1.0);
    assert!(matches!(
        solve_poisson_meanzero(&one, 1e-10),
        Err(Error::NonZeroMean { .. })
    ));
}

#[test]
fn quadrature() {
    let g = grid(64);
    assert_eq!(integrate(&PeriodicField::constant(g, 1.0)), 1.0);
    let c = PeriodicField::from_fn(g, |x| (2.0 * PI * x[0]).cos());
    assert!(integrate(&c).abs() < 1e-14);
    let c2 = c.mul(&c);
    assert!((integrate(&c2) - 0.5).abs() < 1e-12);
}

#[test]
fn interpolation() {
    let g = grid(64);
    let c = PeriodicField::from_fn(g, |x| (2.0 * PI * x[0]).cos());
    assert!(interpolate(&c, [0.25, 0.1]).abs() < 1e-12);

    let f = PeriodicField::from_fn(g, |x| (2.0 * PI * x[0] + 0.3).sin() * (6.0 * PI * x[1]).cos());
    let s = SpectralField::forward(&f);
    for &(i, j) in &[(0, 0), (3, 17), (63, 40), (32, 32)] {
        assert!((s.eval(g.node(i, j)) - f.at(i, j)).abs() < 1e-12);
    }
    let x = [0.123, 0.777];
    let exact = (2.0 * PI * x[0] + 0.3).sin() * (6.0 * PI * x[1]).cos();
    assert!((s.eval(x) - exact).abs() < 1e-12);

    let k = PeriodicField::constant(g, -2.5);
    assert!((interpolate(&k, [0.31, 0.62]) + 2.5).abs() < 1e-12);
}

#[test]
fn interpolation_exact_at_nodes_for_rough_data() {
    let g = grid(16);
    let vals: Vec<f64> = (0..256).map(|i| ((i * 7919) % 101) as f64 / 17.0).collect();
    let f = PeriodicField::new(g, vals).unwrap();
    let s = SpectralField::forward(&f);
    for idx in 0..256 {
        assert!((s.eval(g.node_at(idx)) - f.values()[idx]).abs() < 1e-12);
    }
}

#[test]
fn translation_matches_interpolant() {
    let g = grid(32);
    let vals: Vec<f64> = (0..1024).map(|i| ((i * 31) % 17) as f64).collect();
    let f = PeriodicField::new(g, vals).unwrap();
    let s = SpectralField::forward(&f);
    let p = [0.0123, 0.4567];
    let shifted = s.translate(p).inverse();
    for &(i, j) in &[(0, 0), (5, 9), (31, 31), (16, 16)] {
        let x = g.node(i, j);
        let y = [x[0] - p[0], x[1] - p[1]];
        assert!((shifted.at(i, j) - s.eval(y)).abs() < 1e-10);
    }
}

#[test]
fn coefficient_layout() {
    let g = grid(16);
    let f = PeriodicField::from_fn(g, |x| 2.0 + (2.0 * PI * (3.0 * x[0] - 2.0 * x[1])).cos());
    let s = SpectralField::forward(&f);
    assert!((s.coeff(0, 0).re - 2.0).abs() < 1e-14);
    assert!((s.coeff(3, -2).re - 0.5).abs() < 1e-14);
    assert!((s.coeff(-3, 2).re - 0.5).abs() < 1e-14);
    assert!(s.coeff(3, 2).norm() < 1e-14);
}

fn smooth_field(n: usize, a: [f64; 4]) -> PeriodicField {
    PeriodicField::from_fn(grid(n), move |x| {
        a[0] * (2.0 * PI * x[0]).sin()
            + a[1] * (4.0 * PI * (x[0] + x[1])).cos()
            + a[2] * (2.0 * PI * x[1]).cos().exp()
            + a[3] * ((2.0 * PI * x[0]).sin() * 0.5).exp()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laplacian_integrates_to_zero(a in prop::array::uniform4(-2.0f64..2.0)) {
        let f = smooth_field(32, a);
        prop_assert!(integrate(&laplacian(&f)).abs() < 1e-10);
    }

    #[test]
    fn poisson_inverts_laplacian(a in prop::array::uniform4(-2.0f64..2.0)) {
        let f = smooth_field(32, a).mean_free();
        let back = solve_poisson_meanzero(&laplacian(&f).scale(-1.0), 1e-10).unwrap();
        prop_assert!(back.max_abs_diff(&f) < 1e-10);
    }

    #[test]
    fn laplacian_is_symmetric(a in prop::array::uniform4(-2.0f64..2.0), b in prop::array::uniform4(-2.0f64..2.0)) {
        let f = smooth_field(32, a);
        let g = smooth_field(32, b);
        let lhs = integrate(&f.mul(&laplacian(&g)));
        let rhs = integrate(&g.mul(&laplacian(&f)));
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn spectral_dot_is_grid_mean(a in prop::array::uniform4(-2.0f64..2.0), b in prop::array::uniform4(-2.0f64..2.0)) {
        let f = smooth_field(16, a);
        let g = smooth_field(16, b);
        let sf = SpectralField::forward(&f);
        let sg = SpectralField::forward(&g);
        prop_assert!((sf.dot(&sg) - f.dot(&g)).abs() < 1e-12);
        let e = sf.energy_dot(&sg);
        let direct = -f.dot(&laplacian(&g));
        prop_assert!((e - direct).abs() < 1e-9 * (1.0 + e.abs()));
    }
}
