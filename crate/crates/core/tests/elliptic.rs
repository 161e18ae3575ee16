use std::f64::consts::PI;

use mfbubble::elliptic::{DensityOperator, SaddleSolver, SolveOptions};
use mfbubble::krylov::{minres, Euclidean};
use mfbubble::spectral::{Grid, PeriodicField};

fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

#[test]
fn minres_solves_symmetric_indefinite_system() {
    let n = 12;
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        a[i][i] = (i as f64) - 5.5;
        for j in 0..i {
            let v = ((i * 7 + j * 3) as f64).sin() * 0.3;
            a[i][j] = v;
            a[j][i] = v;
        }
    }
    let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).cos()).collect();
    let b = matvec(&a, &x_true);
    let out = minres(&Euclidean, |x| matvec(&a, x), &b, None, 1e-13, 200);
    assert!(out.converged);
    let err = out
        .x
        .iter()
        .zip(&x_true)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-10, "err {err}");
}

fn bump_density(grid: Grid) -> PeriodicField {
    PeriodicField::from_fn(grid, |x| {
        (0.8 * (2.0 * PI * x[0]).cos() - 0.5 * (2.0 * PI * x[1]).sin()).exp()
    })
}

#[test]
fn density_operator_is_symmetric_and_mean_preserving() {
    let grid = Grid::new(64).unwrap();
    let op = DensityOperator::new(3.0 * PI, &bump_density(grid));
    let a = PeriodicField::from_fn(grid, |x| (2.0 * PI * (x[0] + 2.0 * x[1])).sin()).mean_free();
    let b = PeriodicField::from_fn(grid, |x| (2.0 * PI * x[0]).cos().powi(3)).mean_free();
    let lhs = op.apply(&a).dot(&b);
    let rhs = a.dot(&op.apply(&b));
    assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    assert!(op.apply(&a).mean().abs() < 1e-12);
    assert!((op.density().mean() - 1.0).abs() < 1e-14);
}

#[test]
fn bordered_solve_meets_equation_and_constraints() {
    let grid = Grid::new(64).unwrap();
    let op = DensityOperator::new(4.0 * PI, &bump_density(grid));
    let z1 = PeriodicField::from_fn(grid, |x| {
        let d = ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)) * 40.0;
        (x[0] - 0.5) * (-d).exp()
    })
    .mean_free();
    let z2 = PeriodicField::from_fn(grid, |x| {
        let d = ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)) * 40.0;
        (1.0 - d) * (-d).exp()
    })
    .mean_free();
    let g = PeriodicField::from_fn(grid, |x| (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos() + 0.2)
        .mean_free();
    let solver = SaddleSolver::<2>::new(&op, [z1, z2]).unwrap();
    let sol = solver.solve(&g, None, &SolveOptions::default()).unwrap();
    let (r, cons) = solver.residual(&sol.phi, &sol.c, &g);
    assert!(r.max_abs() < 1e-9, "residual {}", r.max_abs());
    assert!(cons.iter().all(|c| c.abs() < 1e-9), "constraints {cons:?}");
    assert!(sol.phi.mean().abs() < 1e-12);
}

#[test]
fn constraint_with_mean_is_rejected() {
    let grid = Grid::new(32).unwrap();
    let op = DensityOperator::new(1.0, &PeriodicField::constant(grid, 1.0));
    let z = PeriodicField::constant(grid, 1.0);
    assert!(SaddleSolver::<1>::new(&op, [z]).is_err());
}
