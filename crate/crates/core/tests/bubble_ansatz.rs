use std::f64::consts::PI;
use std::sync::OnceLock;

use mfbubble::base_state::{HStar, NewtonOptions, WeightSpec, MARGIN_TOL};
use mfbubble::bubble_ansatz::{
    ansatz_mass_split, assemble_ansatz, derive_params, interface_jumps, outer_deviation,
    outer_deviation_beyond, ustar_at, Background, Geometry, HField,
};
use mfbubble::geom::{scale, torus_dist};
use mfbubble::greens::{singular_weight_at, CollapsePair};
use mfbubble::Error;

fn flat() -> &'static Background {
    static BG: OnceLock<Background> = OnceLock::new();
    BG.get_or_init(|| {
        Background::solve(256, 12.0 * PI, WeightSpec::default(), &NewtonOptions::default(), MARGIN_TOL)
            .unwrap()
    })
}

fn tilted() -> &'static Background {
    static BG: OnceLock<Background> = OnceLock::new();
    BG.get_or_init(|| {
        let weight = WeightSpec {
            hstar: HStar::ExpCos {
                c1: 0.3,
                c2: 0.2,
                s1: 0.1,
                s2: 0.05,
            },
            vortices: vec![],
        };
        Background::solve(256, 12.0 * PI, weight, &NewtonOptions::default(), MARGIN_TOL).unwrap()
    })
}

fn pair(t: f64) -> CollapsePair {
    CollapsePair::new(t, [1.0, 0.0]).unwrap()
}

#[test]
fn h_field_at_q_drops_the_exponent() {
    let bg = tilted();
    let t = 0.2;
    let q = [0.1, -0.05];
    let hf = HField::new(bg, &pair(t), q, 0.45).unwrap();
    let tq = scale(t, q);
    let expected = bg.h_at(tq) * singular_weight_at(&bg.green, &pair(t), tq) / t.powi(4);
    assert!((hf.eval(q) - expected).abs() < 1e-12 * expected);
    assert!(hf.eval(q) > 0.0);
}

#[test]
fn h_field_vanishes_at_the_vortices() {
    let bg = tilted();
    let hf = HField::new(bg, &pair(0.2), [0.0, 0.0], 0.45).unwrap();
    assert!(hf.eval([1.0, 0.0]).abs() < 1e-14);
    assert!(hf.eval([-1.0, 0.0]).abs() < 1e-14);
    assert!(hf.eval([0.5, 0.0]) > 0.0);
}

#[test]
fn h_field_gradient_vanishes_for_even_weight() {
    let bg = flat();
    let hf = HField::new(bg, &pair(0.2), [0.0, 0.0], 0.45).unwrap();
    let g = hf.gradient([0.0, 0.0], 1e-4);
    assert!(g[0].abs() < 1e-8, "{g:?}");
    assert!(g[1].abs() < 1e-8, "{g:?}");
}

#[test]
fn h_field_rejects_far_q() {
    let r = HField::new(flat(), &pair(0.2), [0.5, 0.0], 0.45);
    assert!(matches!(r, Err(Error::OutOfRange(_))));
}

#[test]
fn params_satisfy_their_defining_relations() {
    let bg = tilted();
    let t = 0.2;
    let p = derive_params(bg, &pair(t), [0.05, 0.02], &Geometry::default()).unwrap();
    let half = (p.lambda / 2.0).exp();
    assert!((p.big_lambda - half / (p.c * t)).abs() < 1e-12 * p.big_lambda);
    assert!((p.gamma - half / p.c * 2.2).abs() < 1e-12 * p.gamma);
    assert!((p.theta - 1.0 / (1.0 + p.gamma * p.gamma)).abs() < 1e-15);
    assert!((p.c - (8.0 / (bg.rho() * p.h_q)).sqrt()).abs() < 1e-15);
    // Combination with C = rho H(q) / 8 leaves exactly -w(tq).
    let combo = p.lambda + 2.0 * t.ln() + 2.0 * (bg.rho() * p.h_q / 8.0).ln()
        + 8.0 * PI * p.robin
        - p.log_k;
    assert!((combo + p.w_tq).abs() < 1e-12, "{combo} vs {}", -p.w_tq);
    let k = (bg.rho() / (bg.rho() - 8.0 * PI) * bg.mass()).ln();
    assert!((p.log_k - k).abs() < 1e-14);
}

#[test]
fn gamma_squared_scales_like_inverse_t_squared() {
    let bg = flat();
    let ts = [0.3, 0.25, 0.2, 0.15];
    let ps: Vec<_> = ts
        .iter()
        .map(|&t| derive_params(bg, &pair(t), [0.0, 0.0], &Geometry::default()).unwrap())
        .collect();
    // Gamma^2 H(q) t^2 depends only on rho, R0, the Robin mass and w(0).
    let g: Vec<f64> = ts
        .iter()
        .zip(&ps)
        .map(|(t, p)| (1.0 / p.theta - 1.0) * p.h_q * t * t)
        .collect();
    for v in &g {
        assert!((v / g[0] - 1.0).abs() < 1e-10, "{g:?}");
    }
    // Across this range H(q) moves by less than a factor of 2.
    let h: Vec<f64> = ps.iter().map(|p| p.h_q).collect();
    assert!(h[3] / h[0] < 2.0 && h[0] / h[3] < 2.0, "{h:?}");
    let lt2: Vec<f64> = ts.iter().zip(&ps).map(|(t, p)| p.big_lambda * t * t).collect();
    let hi = lt2.iter().cloned().fold(0.0, f64::max);
    let lo = lt2.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi / lo < 2.0, "{lt2:?}");
    for p in &ps {
        assert!(p.theta > 0.0 && p.theta < 1.0);
    }
}

#[test]
fn flat_weight_params_are_frozen() {
    // h = 1, rho = 12 pi, t = 0.2, q = 0, R0 = 2.2 on the 256 grid.
    let p = derive_params(flat(), &pair(0.2), [0.0, 0.0], &Geometry::default()).unwrap();
    // Independent evaluation: w = 0, K = 3, |q -+ e| = 1 and H(0) = e^{-R_t(0)}.
    let g = &flat().green;
    let r_t = 8.0 * PI * g.regular_part([0.0, 0.0], [0.2, 0.0]);
    let h0 = (-r_t).exp();
    let robin = g.robin();
    let lambda = -2.0 * (0.2f64).ln() - 2.0 * (12.0 * PI * h0 / 8.0).ln() - 8.0 * PI * robin
        + (3.0f64).ln();
    assert!((p.h_q - h0).abs() < 1e-10 * h0);
    assert!((p.lambda - lambda).abs() < 1e-10);
    assert!((p.lambda - FROZEN_LAMBDA).abs() < 1e-6, "lambda = {}", p.lambda);
}

const FROZEN_LAMBDA: f64 = -3.512_283_968_8;

#[test]
fn interface_is_c1() {
    let bg = tilted();
    let p = derive_params(bg, &pair(0.2), [0.05, -0.03], &Geometry::default()).unwrap();
    let j = interface_jumps(&p, bg, 64);
    assert!(j.value < 1e-8, "{j:?}");
    assert!(j.slope < 1e-5, "{j:?}");
}

#[test]
fn outer_branch_matches_green_form() {
    let bg = tilted();
    let pr = pair(0.2);
    let p = derive_params(bg, &pr, [0.05, -0.03], &Geometry::default()).unwrap();
    let ans = assemble_ansatz(&p, bg, &pr).unwrap();
    let grid = bg.grid();
    let mut checked = 0;
    for k in 0..40 {
        let idx = (k * 7919 + 12345) % grid.len();
        let x = grid.node_at(idx);
        if torus_dist(x, p.center()) <= p.core_radius() {
            continue;
        }
        let expect = bg.base.w.values()[idx]
            + 8.0 * PI * bg.green.green(x, p.center()) * (1.0 - p.theta)
            + p.b_const;
        let got = ans.u.values()[idx] + ans.mean_ustar;
        assert!((got - expect).abs() < 1e-9, "at {x:?}: {got} vs {expect}");
        checked += 1;
        if checked == 10 {
            break;
        }
    }
    assert_eq!(checked, 10);
}

#[test]
fn peak_height_is_the_inner_formula_at_its_centre() {
    let bg = tilted();
    let pr = pair(0.2);
    let p = derive_params(bg, &pr, [0.05, -0.03], &Geometry::default()).unwrap();
    let t = p.t;
    let r = bg.green.robin();
    let k = (bg.rho() / (bg.rho() - 8.0 * PI) * bg.mass()).ln();
    let expect = p.lambda - 6.0 * t.ln() + 8.0 * PI * r * (1.0 - p.theta) - 8.0 * PI * r + k;
    let got = ustar_at(&p, bg, p.center());
    assert!((got - expect).abs() < 1e-10, "{got} vs {expect}");
}

#[test]
fn ansatz_is_mean_free_and_mass_split_is_sane() {
    let bg = tilted();
    let pr = pair(0.2);
    let p = derive_params(bg, &pr, [0.0, 0.0], &Geometry::default()).unwrap();
    let ans = assemble_ansatz(&p, bg, &pr).unwrap();
    assert!(ans.u.mean().abs() < 1e-10);
    let m = ansatz_mass_split(&ans, bg);
    assert!(m.inner_mass > 8.0 * PI && m.inner_mass < bg.rho());
    assert!(m.a_const.abs() < 0.1);
    assert!(outer_deviation(&ans, bg) >= outer_deviation_beyond(&ans, bg, 2.0 * p.core_radius()));
}

#[test]
fn coarse_grid_is_under_resolved() {
    let bg = Background::solve(64, 12.0 * PI, WeightSpec::default(), &NewtonOptions::default(), MARGIN_TOL)
        .unwrap();
    let pr = pair(0.2);
    let p = derive_params(&bg, &pr, [0.0, 0.0], &Geometry::default()).unwrap();
    let r = assemble_ansatz(&p, &bg, &pr);
    assert!(matches!(r, Err(Error::UnderResolved(_))));
}

#[test]
fn wrapping_disc_is_rejected() {
    let pr = pair(0.3);
    let p = derive_params(flat(), &pr, [0.0, 0.0], &Geometry::default()).unwrap();
    assert!(matches!(assemble_ansatz(&p, flat(), &pr), Err(Error::OutOfRange(_))));
}

#[test]
fn geometry_bounds_are_enforced() {
    let bad = Geometry {
        big_r0: 2.0,
        small_r0: 0.45,
    };
    assert!(derive_params(flat(), &pair(0.2), [0.0, 0.0], &bad).is_err());
}
