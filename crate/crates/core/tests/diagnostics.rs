use std::f64::consts::PI;
use std::sync::OnceLock;

use mfbubble::base_state::{HStar, NewtonOptions, WeightSpec, MARGIN_TOL};
use mfbubble::bubble_ansatz::{
    ansatz_mass_split, assemble_ansatz, derive_params, outer_deviation_beyond, Ansatz, Background,
    Geometry,
};
use mfbubble::config::SweepConfig;
use mfbubble::diagnostics::{fit_rate, run_sweep, SolutionView, SweepResult};
use mfbubble::greens::CollapsePair;
use mfbubble::io::to_json;
use mfbubble::reduction::BallGuard;
use mfbubble::Error;

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

fn ansatz(t: f64) -> Ansatz {
    let bg = tilted();
    let p = derive_params(bg, &pair(t), [0.01, 0.0], &Geometry::default()).unwrap();
    assemble_ansatz(&p, bg, &pair(t)).unwrap()
}

fn view(t: f64) -> (Ansatz, SolutionView<'static>) {
    let ans = ansatz(t);
    let v = SolutionView::new(tilted(), &pair(t), ans.params, &ans.singular, ans.u.clone());
    (ans, v)
}

/// A three-point sweep on a coarse grid.
fn small_config() -> SweepConfig {
    let mut cfg = SweepConfig {
        t_list: vec![0.16, 0.15, 0.14],
        grid_n: vec![288],
        ..SweepConfig::default()
    };
    cfg.adjust.c_tol = 1e-9;
    cfg.adjust.contraction.fp_tol = 1e-11;
    cfg.adjust.contraction.guard = BallGuard::Sup(4.0);
    cfg
}

fn small_sweep() -> &'static SweepResult {
    static S: OnceLock<SweepResult> = OnceLock::new();
    S.get_or_init(|| run_sweep(&small_config(), |_, _| {}).unwrap())
}

#[test]
fn density_integrates_to_rho() {
    let (_, v) = view(0.2);
    assert!((v.density().mean() - 12.0 * PI).abs() < 1e-10);
}

#[test]
fn local_mass_is_monotone_and_bounded() {
    let (ans, v) = view(0.2);
    let c = ans.params.center();
    let radii = [0.01, 0.02, 0.05, 0.1, 0.2, 0.4, 0.8];
    let m: Vec<f64> = radii.iter().map(|&r| v.local_mass(c, r)).collect();
    for w in m.windows(2) {
        assert!(w[1] >= w[0], "{m:?}");
    }
    assert!((v.local_mass(c, 1.0) - 12.0 * PI).abs() < 1e-9);
    let curve = v.sigma0_curve(&radii);
    assert_eq!(curve.len(), radii.len());
    assert_eq!(curve[3], [0.1, m[3]]);
}

#[test]
fn local_mass_on_the_core_is_the_inner_mass() {
    let (ans, v) = view(0.2);
    let split = ansatz_mass_split(&ans, tilted());
    let got = v.local_mass(ans.params.center(), ans.params.core_radius());
    assert!((got - split.inner_mass).abs() < 1e-9, "{got} vs {}", split.inner_mass);
}

#[test]
fn outer_error_of_the_ansatz_is_its_outer_deviation() {
    let (ans, v) = view(0.15);
    let r = 2.0 * ans.params.core_radius();
    let a = v.outer_error(ans.params.center(), r).unwrap();
    let b = outer_deviation_beyond(&ans, tilted(), r);
    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
}

#[test]
fn outer_error_needs_a_non_empty_region() {
    let (ans, v) = view(0.2);
    assert!(matches!(v.outer_error(ans.params.center(), 0.9), Err(Error::OutOfRange(_))));
}

#[test]
fn pohozaev_radii_follow_their_definitions() {
    let (ans, v) = view(0.2);
    let p = v.pohozaev();
    assert!((p.r_sigma - 0.2f64.sqrt()).abs() < 1e-15);
    assert!((p.r_m - ans.params.gamma / (2.0 * ans.params.big_lambda)).abs() < 1e-15);
    let d = p.sigma0 - p.m0;
    assert!((p.residual - d * (p.sigma0 + p.m0 - 24.0 * PI)).abs() < 1e-9);
    assert!(p.sigma0 >= p.m0);
}

#[test]
fn profile_fit_finds_the_peak_of_the_ansatz() {
    let (ans, v) = view(0.2);
    let fit = v.profile_fit(0.45, 0.25, 5.0).unwrap();
    // On U the maximum sits at tq up to the slope of the regular part.
    let q = [0.01, 0.0];
    assert!((fit.p_t[0] - q[0]).abs() < 0.05 && fit.p_t[1].abs() < 0.05, "{:?}", fit.p_t);
    assert!(fit.peak_ratio < 1.0);
    assert!(fit.lambda_meas.is_finite() && fit.c_t > 0.0);
    assert!(fit.eta_max.is_finite() && fit.eta_max_weighted <= fit.eta_max);
    assert!(fit.eta_samples > 0);
    let _ = ans;
}

#[test]
fn rate_fit_recovers_a_power_law() {
    let t = [0.2, 0.1, 0.05, 0.025];
    let y: Vec<f64> = t.iter().map(|s: &f64| 3.0 * s.powf(1.7)).collect();
    let fit = fit_rate(&t, &y, false).unwrap();
    assert!((fit.exponent - 1.7).abs() < 1e-12);
    assert!(fit.half_width < 1e-10);
    assert!((fit.intercept - 3.0f64.ln()).abs() < 1e-12);
    let yl: Vec<f64> = t.iter().map(|s: &f64| s.powf(2.0) * s.ln().abs()).collect();
    let fl = fit_rate(&t, &yl, true).unwrap();
    assert!((fl.exponent - 2.0).abs() < 1e-12 && fl.log_corrected);
}

#[test]
fn rate_fit_reports_noise_in_the_half_width() {
    let t = [0.2, 0.15, 0.1, 0.07, 0.05];
    let y: Vec<f64> = t
        .iter()
        .enumerate()
        .map(|(i, s): (usize, &f64)| s.powi(2) * (1.0 + 0.2 * if i % 2 == 0 { 1.0 } else { -1.0 }))
        .collect();
    let fit = fit_rate(&t, &y, false).unwrap();
    assert!(fit.half_width > 0.05);
    assert!((fit.exponent - 2.0).abs() < fit.half_width);
}

#[test]
fn rate_fit_needs_three_positive_points() {
    let r = fit_rate(&[0.2, 0.1, 0.05], &[1.0, 0.0, 0.5], false);
    assert!(matches!(r, Err(Error::TooFewPoints(2))));
}

#[test]
fn small_sweep_solves_every_point() {
    let s = small_sweep();
    for p in &s.points {
        assert!(p.report.is_some(), "t = {}: {:?}", p.t, p.error);
    }
    assert_eq!(s.bases.len(), 1);
    for r in s.reports() {
        assert!(r.is_finite());
        assert!(r.c_final[0].hypot(r.c_final[1]) < 1e-9);
        assert!(r.residual < 1e-6, "t = {}: residual {}", r.t, r.residual);
        assert!(r.mean_u.abs() < 1e-10);
        assert!(r.contraction_factor < 0.5);
        assert!(r.linear.restart_difference < 1e-7);
        assert!((r.frame.gram[0][0] - r.frame.energy_radial).abs() < 1e-5 * r.frame.energy_radial);
    }
    assert!(s.fits.outer_err.is_some());
}

#[test]
fn sweep_output_is_deterministic() {
    let mut cfg = small_config();
    cfg.t_list = vec![0.15];
    let a = to_json(&run_sweep(&cfg, |_, _| {}).unwrap()).unwrap();
    let b = to_json(&run_sweep(&cfg, |_, _| {}).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn under_resolved_points_are_recorded() {
    let mut cfg = small_config();
    cfg.t_list = vec![0.14];
    cfg.grid_n = vec![256];
    let s = run_sweep(&cfg, |_, _| {}).unwrap();
    assert_eq!(s.successes(), 0);
    let e = s.points[0].error.as_deref().unwrap();
    assert!(e.contains("under-resolved"), "{e}");
    assert!(s.fits.outer_err.is_none());
}

#[test]
fn sweep_rejects_an_invalid_config() {
    let mut cfg = small_config();
    cfg.t_list = vec![0.1, 0.15];
    assert!(matches!(run_sweep(&cfg, |_, _| {}), Err(Error::Config(_))));
}

#[test]
fn diagnostics_are_stable_under_refinement() {
    let weight = tilted().weight.clone();
    let fine = Background::solve(512, 12.0 * PI, weight, &NewtonOptions::default(), MARGIN_TOL).unwrap();
    let t = 0.2;
    let pr = pair(t);
    let measure = |bg: &Background| {
        let p = derive_params(bg, &pr, [0.01, 0.0], &Geometry::default()).unwrap();
        let ans = assemble_ansatz(&p, bg, &pr).unwrap();
        let v = SolutionView::new(bg, &pr, p, &ans.singular, ans.u.clone());
        let c = p.center();
        let po = v.pohozaev();
        [
            v.local_mass(c, 0.1),
            v.local_mass(c, p.core_radius()),
            po.sigma0,
            po.m0,
            v.far_point_error(),
            ansatz_mass_split(&ans, bg).inner_mass,
        ]
    };
    let a = measure(tilted());
    let b = measure(&fine);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-3 * y.abs(), "{a:?} vs {b:?}");
    }
}
