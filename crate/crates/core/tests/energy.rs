mod common;

use common::{critical_level_3d, rel};
use crit_elliptic::constants::truncated_bubble;
use crit_elliptic::energy::{
    comparison_path_report, comparison_path_report_on, eval_i, eval_ip, eval_jnu, pohozaev_residual,
    residual_norm, residual_pairing, tang_theta_inequality, weak_residual, EnergyReport, PathMode, PohozaevMode,
    ProblemSpec,
};
use crit_elliptic::hypothesis::construct_appendix_a1_params;
use crit_elliptic::nonlinearity::{NonlinearitySpec, OscCriticalParams};
use crit_elliptic::potential::{CoefficientSpec, PotentialSpec};
use crit_elliptic::radial::{logspace, norm_hv_sq, RadialFn, RadialGrid};
use crit_elliptic::Error;
use proptest::prelude::*;
use std::f64::consts::PI;

fn small() -> RadialGrid {
    RadialGrid::new(3, 1024, 20.0).unwrap()
}

/// −Δu = u⁵ with nothing else: the bubbles are exact critical points.
fn pure_critical(grid: RadialGrid) -> ProblemSpec {
    let mut p = ProblemSpec::model(grid, 0.0, 4.0);
    p.v = PotentialSpec::Constant { value: 0.0 };
    p.v_p = p.v.clone();
    p.f = NonlinearitySpec::zero();
    p.f_p = NonlinearitySpec::zero();
    p
}

fn families(grid: RadialGrid) -> Vec<(&'static str, ProblemSpec)> {
    let model = ProblemSpec::model(grid, 1.0, 4.0);
    let mut well = model.clone();
    well.v = PotentialSpec::GaussianWell;
    well.b = CoefficientSpec::GaussianBump { base: 1.0, amplitude: 0.5 };
    let mut osc = model.clone();
    osc.f = NonlinearitySpec::OscSubcritical(construct_appendix_a1_params(4.0, 3).unwrap());
    osc.f_p = osc.f.clone();
    osc.g = NonlinearitySpec::OscCritical(OscCriticalParams { dim: 3, a: 0.2, b: 0.02, e: 0.1, omega: 4.0 * PI });
    vec![("model", model), ("well", well), ("oscillatory", osc)]
}

fn decomposition_gap(r: &EnergyReport) -> f64 {
    (r.value - (0.5 * r.kinetic + 0.5 * r.potential - r.f_part - r.g_part)).abs()
}

#[test]
fn zero_function() {
    let g = small();
    let p = ProblemSpec::model(g, 1.0, 4.0);
    let z = RadialFn::zeros(g);
    let r = eval_i(&p, &z).unwrap();
    assert_eq!(r.value, 0.0);
    assert_eq!(r.residual_norm, 0.0);
    assert_eq!(weak_residual(&p, &z).unwrap().max_abs(), 0.0);
    assert_eq!(pohozaev_residual(&p, &z, PohozaevMode::AutonomousFull).unwrap(), 0.0);
    assert_eq!(tang_theta_inequality(&p, &z, &[0.0, 0.5, 0.9]).unwrap(), 0.0);
}

#[test]
fn bubble_energy_is_the_critical_level() {
    let g = RadialGrid::standard();
    let p = pure_critical(g);
    let u = truncated_bubble(&g, 0.01);
    let r = eval_jnu(&p, &u, 1.0).unwrap();
    assert!(rel(r.value, critical_level_3d()) < 0.01, "J = {}", r.value);
    assert!(rel(eval_i(&p, &u).unwrap().value, r.value) < 1e-12);
}

fn wide() -> RadialGrid {
    // same step as the standard grid, four times the radius
    RadialGrid::new(3, 16384, 160.0).unwrap()
}

#[test]
fn bubble_residual_is_a_truncation_defect() {
    // cutting the bubble at R_max leaves a defect of order √ε / R_max in the dual norm
    let at = |g: RadialGrid, eps: f64| residual_norm(&pure_critical(g), &truncated_bubble(&g, eps)).unwrap();
    let base = at(RadialGrid::standard(), 0.01);
    assert!(base < 0.1, "residual {base:e}");
    assert!(rel(at(RadialGrid::standard(), 0.04) / base, 2.0) < 0.1);
    assert!(rel(base / at(wide(), 0.01), 4.0) < 0.1);
    let finer = at(RadialGrid::new(3, 8192, 40.0).unwrap(), 0.01);
    assert!(rel(finer, base) < 0.01);
}

#[test]
fn bubble_satisfies_the_pohozaev_identity() {
    let g = wide();
    let u = truncated_bubble(&g, 0.01);
    let poho = pohozaev_residual(&pure_critical(g), &u, PohozaevMode::AutonomousJ(1.0)).unwrap();
    assert!(poho.abs() < 1e-3, "pohozaev {poho:e}");
}

#[test]
fn energy_along_rays_is_eventually_very_negative() {
    let g = small();
    let mut rng = common::rng(11);
    for (name, p) in families(g) {
        let u = common::random_bump(&g, &mut rng, 1.0);
        let ratios: Vec<f64> = logspace(1.0, 1e3, 30)
            .into_iter()
            .map(|t| eval_i(&p, &u.scale(t)).unwrap().value / (t * t))
            .collect();
        assert!(ratios.windows(2).skip(10).all(|w| w[1] < w[0]), "{name}");
        assert!(*ratios.last().unwrap() < -1e6, "{name}: {:?}", ratios.last());
    }
}

#[test]
fn gradient_matches_central_differences() {
    let g = small();
    let mut rng = common::rng(3);
    let h = 1e-5;
    for (name, p) in families(g) {
        for _ in 0..100 {
            let u = common::random_radial(&g, &mut rng, 1.5);
            let phi = common::random_radial(&g, &mut rng, 1.0);
            let plus = eval_i(&p, &u.axpy(h, &phi).unwrap()).unwrap().value;
            let minus = eval_i(&p, &u.axpy(-h, &phi).unwrap()).unwrap().value;
            let fd = (plus - minus) / (2.0 * h);
            let exact = residual_pairing(&p, &u, &phi).unwrap();
            assert!(rel(fd, exact) < 1e-6, "{name}: fd {fd} vs {exact}");
        }
    }
}

#[test]
fn mountain_pass_geometry_near_the_origin() {
    let g = small();
    let mut rng = common::rng(17);
    for (name, p) in families(g) {
        let mut lowest = f64::INFINITY;
        for _ in 0..200 {
            let u = common::random_radial(&g, &mut rng, 1.0);
            let n = norm_hv_sq(&u, &p.v).unwrap().sqrt();
            let v = u.scale(0.1 / n);
            lowest = lowest.min(eval_i(&p, &v).unwrap().value);
        }
        assert!(lowest > 0.0, "{name}: {lowest}");
    }
}

#[test]
fn energy_decomposition_identity() {
    let g = small();
    let mut rng = common::rng(23);
    for (_, p) in families(g) {
        for _ in 0..20 {
            let u = common::random_radial(&g, &mut rng, 2.0);
            for r in [eval_i(&p, &u).unwrap(), eval_ip(&p, &u).unwrap(), eval_jnu(&p, &u, 0.7).unwrap()] {
                assert!(decomposition_gap(&r) <= 1e-12 * (1.0 + r.value.abs()));
            }
        }
    }
}

#[test]
fn tang_inequality_on_random_functions() {
    let g = small();
    let mut rng = common::rng(29);
    let thetas: Vec<f64> = (0..=50).map(|k| k as f64 / 50.0).collect();
    for (name, p) in families(g) {
        for _ in 0..100 {
            let u = common::random_radial(&g, &mut rng, 2.0);
            let m = tang_theta_inequality(&p, &u, &thetas).unwrap();
            assert!(m >= -1e-8, "{name}: {m}");
        }
    }
}

#[test]
fn tang_margin_vanishes_at_a_critical_point() {
    let g = RadialGrid::standard();
    let p = pure_critical(g);
    let u = truncated_bubble(&g, 0.01);
    let level = eval_i(&p, &u).unwrap().value;
    assert!(tang_theta_inequality(&p, &u, &[1.0]).unwrap().abs() < 1e-12 * level);
    let near = tang_theta_inequality(&p, &u, &[0.999]).unwrap();
    // I(u) − I(tu) is O((1−t)²) once I′(u) = 0
    assert!(near >= 0.0 && near < 1e-4 * level, "{near}");
    assert!(tang_theta_inequality(&p, &u, &[0.0]).unwrap() > 0.0);
}

#[test]
fn identical_functionals_give_identical_paths() {
    let g = small();
    let p = ProblemSpec::model(g, 1.0, 4.0);
    let u = common::random_bump(&g, &mut common::rng(1), 1.0);
    for mode in [PathMode::ScalingTu, PathMode::DilationUOfXOverT] {
        let r = comparison_path_report(&p, &u, mode).unwrap();
        for (a, b) in r.i_values.iter().zip(&r.ip_values) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
        assert!((r.max_i - r.max_ip).abs() <= 1e-12 * (1.0 + r.max_i.abs()));
    }
}

#[test]
fn dilation_path_peaks_at_one_for_a_critical_point() {
    let g = wide();
    let p = pure_critical(g);
    let u = truncated_bubble(&g, 0.01);
    let ts = logspace(0.1, 10.0, 201);
    let r = comparison_path_report_on(&p, &u, PathMode::DilationUOfXOverT, &ts).unwrap();
    assert!((r.argmax_i - 1.0).abs() < 1e-2, "argmax {}", r.argmax_i);
}

#[test]
fn full_pohozaev_requires_an_autonomous_limit() {
    let g = small();
    let mut p = ProblemSpec::model(g, 1.0, 4.0);
    p.b_p = CoefficientSpec::GaussianBump { base: 1.0, amplitude: 0.5 };
    let u = common::random_bump(&g, &mut common::rng(2), 1.0);
    assert!(matches!(pohozaev_residual(&p, &u, PohozaevMode::AutonomousFull), Err(Error::PohozaevMode)));
}

#[test]
fn functions_on_another_grid_are_rejected() {
    let p = ProblemSpec::model(small(), 1.0, 4.0);
    let other = RadialFn::zeros(RadialGrid::new(3, 512, 20.0).unwrap());
    assert!(matches!(eval_i(&p, &other), Err(Error::GridMismatch)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scaling_energy_is_a_quadratic_minus_powers(t in 0.01f64..5.0, amp in 0.2f64..2.0, w in 0.5f64..3.0) {
        // for the model, I(tu) = t²a/2 − t⁴F − t⁶G exactly
        let g = small();
        let p = ProblemSpec::model(g, 1.0, 4.0);
        let u = g.sample(|r| amp * (-(r / w).powi(2)).exp()).unwrap();
        let r = eval_i(&p, &u).unwrap();
        let expect = 0.5 * t * t * (r.kinetic + r.potential) - t.powi(4) * r.f_part - t.powi(6) * r.g_part;
        let got = eval_i(&p, &u.scale(t)).unwrap().value;
        prop_assert!((got - expect).abs() <= 1e-11 * (1.0 + expect.abs()));
    }

    #[test]
    fn nehari_value_is_the_pairing_with_u(seed in 0u64..1000) {
        let g = small();
        let p = ProblemSpec::model(g, 1.0, 4.0);
        let u = common::random_radial(&g, &mut common::rng(seed), 1.5);
        let r = eval_i(&p, &u).unwrap();
        let pair = residual_pairing(&p, &u, &u).unwrap();
        prop_assert!((r.nehari - pair).abs() <= 1e-12 * (1.0 + pair.abs()));
        // and equals kinetic + potential − ∫f(u)u − ∫g(u)u = a − 4F − 6G
        prop_assert!(rel(pair, r.kinetic + r.potential - 4.0 * r.f_part - 6.0 * r.g_part) < 1e-10);
    }
}
