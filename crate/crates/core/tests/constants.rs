mod common;

use approx::assert_relative_eq;
use common::{rel, sobolev_3d};
use crit_elliptic::constants::{
    compute_constants, compute_k_gbar, compute_k_gbar_from, compute_s, compute_s_gbar, derive_kappa_mu_lambda,
    sobolev_quotient, truncated_bubble,
};
use crit_elliptic::nonlinearity::{NonlinearitySpec, OscCriticalParams};
use crit_elliptic::radial::{integrate_values, talenti, RadialFn, RadialGrid};
use crit_elliptic::Error;
use proptest::prelude::*;
use std::f64::consts::PI;

fn osc_crit() -> NonlinearitySpec {
    NonlinearitySpec::OscCritical(OscCriticalParams { dim: 3, a: 0.2, b: 0.02, e: 0.1, omega: 4.0 * PI })
}

fn mid_grid() -> RadialGrid {
    RadialGrid::new(3, 2048, 40.0).unwrap()
}

#[test]
fn sobolev_constant_matches_closed_form() {
    let s = compute_s(&RadialGrid::standard()).unwrap();
    assert!(rel(s, sobolev_3d()) < 0.01, "S = {s}");
}

#[test]
fn bubble_quotient_is_flat_in_epsilon() {
    let g = RadialGrid::standard();
    // the truncation defect grows like √ε / R_max
    for eps in [0.005, 0.01, 0.02] {
        let a = sobolev_quotient(&truncated_bubble(&g, eps));
        let b = sobolev_quotient(&truncated_bubble(&g, 2.0 * eps));
        assert!(rel(a, b) < 0.005, "eps = {eps}: {a} vs {b}");
    }
}

#[test]
fn bubble_normalization_constant() {
    assert_relative_eq!(talenti(3, 1.0, 0.0), 3f64.powf(0.25), max_relative = 1e-15);
    let eps: f64 = 0.3;
    assert_relative_eq!(talenti(3, eps, 0.0), 3f64.powf(0.25) * eps.powf(-0.25), max_relative = 1e-14);
}

#[test]
fn self_similar_constant_of_the_pure_power() {
    let g = mid_grid();
    let s = compute_s(&g).unwrap();
    let r = compute_s_gbar(&NonlinearitySpec::critical_power(3), &g, 3).unwrap();
    assert!(rel(r.value, s) < 0.01, "{} vs {s}", r.value);
    assert!(r.spread < 0.01, "spread {}", r.spread);
    assert!(r.warning.is_none());
}

#[test]
fn oscillatory_constant_is_sandwiched() {
    let g = mid_grid();
    let s = compute_s(&g).unwrap();
    let r = compute_s_gbar(&osc_crit(), &g, 3).unwrap();
    // Ḡ lies between (A−B+E)|s|^6 and (A+B+E)|s|^6
    let lower = s / 0.32f64.powf(1.0 / 3.0);
    let upper = s / 0.28f64.powf(1.0 / 3.0);
    assert!(r.value >= lower * 0.999 && r.value <= upper * 1.001, "{lower} <= {} <= {upper}", r.value);
}

#[test]
fn minimizer_satisfies_the_constraint() {
    let g = mid_grid();
    let f = osc_crit();
    let r = compute_s_gbar(&f, &g, 1).unwrap();
    let u = r.minimizer.unwrap();
    let dens: Vec<f64> = u.values().iter().map(|&x| f.value(x) * x).collect();
    let c = integrate_values(&g, &dens).unwrap();
    assert!((c - 1.0).abs() < 1e-8, "constraint {c}");
}

#[test]
fn enlarging_the_nonlinearity_lowers_the_constant() {
    let g = mid_grid();
    let one = compute_s_gbar(&NonlinearitySpec::critical_power(3), &g, 1).unwrap().value;
    let two = compute_s_gbar(&NonlinearitySpec::power(2.0, 6.0), &g, 1).unwrap().value;
    assert!(two < one);
    assert!(rel(two, one * 2f64.powf(-1.0 / 3.0)) < 1e-3);
}

#[test]
fn dual_constant_of_the_pure_power() {
    let g = mid_grid();
    let s = compute_s(&g).unwrap();
    let k = compute_k_gbar(&NonlinearitySpec::critical_power(3), &g).unwrap();
    assert!(rel(k, s.powf(-3.0)) < 0.03, "K = {k}, S^-3 = {}", s.powf(-3.0));
}

#[test]
fn zero_start_is_infeasible_for_the_dual() {
    let g = RadialGrid::new(3, 256, 10.0).unwrap();
    let r = compute_k_gbar_from(&NonlinearitySpec::critical_power(3), &RadialFn::zeros(g), 10);
    assert!(matches!(r, Err(Error::InvalidParameter(_))));
}

#[test]
fn zero_nonlinearity_has_no_constant() {
    let g = RadialGrid::new(3, 256, 10.0).unwrap();
    assert!(matches!(compute_s_gbar(&NonlinearitySpec::zero(), &g, 1), Err(Error::CriticalFamilyRequired)));
    assert!(matches!(
        compute_constants(&NonlinearitySpec::zero(), &g, 1.0, 1.0, 1),
        Err(Error::CriticalFamilyRequired)
    ));
}

#[test]
fn classical_derived_constants() {
    let s = sobolev_3d();
    let d = derive_kappa_mu_lambda(&NonlinearitySpec::critical_power(3), 3, 1.0, 1.0, s, s);
    assert_eq!(d.kappa_star, 1.0);
    assert_eq!(d.mu_star, 6.0);
    assert_relative_eq!(d.lambda_star, 1.0 / 6.0, max_relative = 1e-15);
    assert!(d.kappa_ok && d.mu_ok);
}

#[test]
fn coefficient_ratio_scales_the_kappa_bracket() {
    let f = osc_crit();
    let (s, sg) = (5.4, 8.2);
    let one = derive_kappa_mu_lambda(&f, 3, 1.0, 1.0, s, sg).kappa_star;
    let four = derive_kappa_mu_lambda(&f, 3, 1.0, 4.0, s, sg).kappa_star;
    // N = 3: the bracket is κ*²
    assert_relative_eq!(four * four, 4.0 * one * one, max_relative = 1e-13);
}

#[test]
fn report_is_consistent() {
    let g = mid_grid();
    let r = compute_constants(&NonlinearitySpec::critical_power(3), &g, 1.0, 4.0, 3).unwrap();
    assert_eq!(r.s_gbar_b, 4f64.powf(-1.0 / 3.0) * r.s_gbar);
    assert!(r.duality_residual < 1e-2, "{}", r.duality_residual);
    assert!(rel(r.s_gbar, r.k_gbar.powf(-1.0 / 3.0)) < 1e-3);
    assert_eq!(r.nodes, 2048);
    let j = serde_json::to_value(&r).unwrap();
    for key in ["S", "S_Gbar", "S_Gbar_b", "K_Gbar", "kappa_star", "mu_star", "lambda_star"] {
        assert!(j.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn resolution_is_stable_under_refinement() {
    let coarse = RadialGrid::new(3, 2048, 40.0).unwrap();
    let fine = RadialGrid::new(3, 4096, 40.0).unwrap();
    let (a, b) = (compute_s(&coarse).unwrap(), compute_s(&fine).unwrap());
    assert!(rel(a, b) < 0.005, "{a} vs {b}");
    let f = osc_crit();
    let (a, b) = (compute_s_gbar(&f, &coarse, 1).unwrap().value, compute_s_gbar(&f, &fine, 1).unwrap().value);
    assert!(rel(a, b) < 0.005, "{a} vs {b}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn power_constant_scales_with_its_coefficient(lambda in 0.5f64..4.0) {
        let g = RadialGrid::new(3, 1024, 20.0).unwrap();
        let base = compute_s_gbar(&NonlinearitySpec::critical_power(3), &g, 1).unwrap().value;
        let scaled = compute_s_gbar(&NonlinearitySpec::power(lambda, 6.0), &g, 1).unwrap().value;
        prop_assert!(rel(scaled * lambda.powf(1.0 / 3.0), base) < 1e-3);
    }
}
