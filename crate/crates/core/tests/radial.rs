mod common;

use approx::assert_relative_eq;
use common::{radial_integral_3d, rel, sobolev_3d};
use crit_elliptic::potential::PotentialSpec;
use crit_elliptic::radial::{
    apply_dilation, critical_exponent, grad_seminorm_sq, integrate, norm_hv_sq, norm_lp, surface_measure, talenti,
    RadialFn, RadialGrid,
};
use crit_elliptic::Error;
use proptest::prelude::*;
use std::f64::consts::PI;

fn grid() -> RadialGrid {
    RadialGrid::standard()
}

#[test]
fn grid_layout_and_dirichlet_node() {
    let g = grid();
    assert_eq!(g.len(), 4097);
    assert_relative_eq!(g.step(), 40.0 / 4096.0);
    assert_eq!(g.r(0), 0.0);
    assert_relative_eq!(g.r(4096), 40.0);
    let u = g.sample(|_| 1.0).unwrap();
    assert_eq!(u.values()[4096], 0.0);
    assert!(u.values()[..4096].iter().all(|v| *v == 1.0));
}

#[test]
fn surface_measures_match_closed_forms() {
    assert_relative_eq!(surface_measure(3), 4.0 * PI, max_relative = 1e-14);
    assert_relative_eq!(surface_measure(4), 2.0 * PI * PI, max_relative = 1e-14);
    assert_relative_eq!(surface_measure(5), 8.0 * PI * PI / 3.0, max_relative = 1e-14);
}

#[test]
fn invalid_grids_are_rejected() {
    assert!(matches!(RadialGrid::new(2, 100, 10.0), Err(Error::InvalidGrid(_))));
    assert!(matches!(RadialGrid::new(3, 4, 10.0), Err(Error::InvalidGrid(_))));
    assert!(matches!(RadialGrid::new(3, 100, f64::NAN), Err(Error::InvalidGrid(_))));
    assert!(matches!(RadialGrid::new(3, 100, -1.0), Err(Error::InvalidGrid(_))));
}

#[test]
fn non_finite_values_are_rejected() {
    let g = RadialGrid::new(3, 16, 4.0).unwrap();
    let mut v = vec![0.0; 17];
    v[3] = f64::INFINITY;
    assert!(RadialFn::new(g, v).is_err());
}

#[test]
fn integral_of_zero_is_zero() {
    assert_eq!(integrate(&RadialFn::zeros(grid())).unwrap(), 0.0);
}

#[test]
fn gaussian_integral_in_three_dimensions() {
    let d = grid().sample(|r| (-r * r).exp()).unwrap();
    assert_relative_eq!(integrate(&d).unwrap(), PI.powf(1.5), max_relative = 1e-5);
}

#[test]
fn instanton_critical_power_matches_adaptive_quadrature() {
    let g = grid();
    let q = critical_exponent(3);
    let d = g.sample(|r| talenti(3, 1.0, r).powf(q)).unwrap();
    // same truncation [0, R_max] on both sides
    let oracle = radial_integral_3d(&|r| talenti(3, 1.0, r).powf(q), g.r_max(), 1e-13);
    let err = rel(integrate(&d).unwrap(), oracle);
    assert!(err < 1e-6, "relative error {err:e}");
}

#[test]
fn non_finite_density_is_an_error() {
    let g = RadialGrid::new(3, 16, 4.0).unwrap();
    let d = g.sample(|_| 1.0).unwrap();
    let bad: Vec<f64> = d.values().iter().map(|v| v * f64::NAN).collect();
    assert!(crit_elliptic::radial::integrate_values(&g, &bad).is_err());
}

#[test]
fn gradient_of_gaussian_matches_quadrature() {
    let u = grid().sample(|r| (-r * r).exp()).unwrap();
    let oracle = radial_integral_3d(&|r| 4.0 * r * r * (-2.0 * r * r).exp(), 40.0, 1e-14);
    let err = rel(grad_seminorm_sq(&u), oracle);
    assert!(err < 1e-5, "relative error {err:e}");
    // closed form 3(π/2)^{3/2}
    assert_relative_eq!(oracle, 3.0 * (PI / 2.0).powf(1.5), max_relative = 1e-10);
}

#[test]
fn zero_function_has_zero_norms() {
    let z = RadialFn::zeros(grid());
    assert_eq!(grad_seminorm_sq(&z), 0.0);
    assert_eq!(norm_lp(&z, 2.0), 0.0);
    assert_eq!(norm_lp(&z, 6.0), 0.0);
    assert_eq!(norm_hv_sq(&z, &PotentialSpec::GaussianWell).unwrap(), 0.0);
}

#[test]
fn unit_potential_norm_is_gradient_plus_l2() {
    let u = grid().sample(|r| (-r * r / 3.0).exp() * (1.0 + r).cos()).unwrap();
    let n = norm_hv_sq(&u, &PotentialSpec::Constant { value: 1.0 }).unwrap();
    assert_relative_eq!(n, grad_seminorm_sq(&u) + norm_lp(&u, 2.0).powi(2), max_relative = 1e-13);
}

#[test]
fn dilation_by_zero_levels_is_identity() {
    let u = grid().sample(|r| (-r).exp()).unwrap();
    assert_eq!(apply_dilation(&u, 2.0, 0), u);
}

#[test]
fn dilation_preserves_gradient_and_critical_norm() {
    let u = grid().sample(|r| (-r * r / 4.0).exp()).unwrap();
    let v = apply_dilation(&u, 2f64.sqrt(), 1);
    let q = critical_exponent(3);
    assert!(rel(grad_seminorm_sq(&v), grad_seminorm_sq(&u)) < 0.02);
    assert!(rel(norm_lp(&v, q), norm_lp(&u, q)) < 0.02);
}

#[test]
fn gaussian_well_and_unit_potential_norms_are_equivalent() {
    let g = RadialGrid::new(3, 2048, 40.0).unwrap();
    let d1 = crit_elliptic::hypothesis::smallest_rayleigh(&PotentialSpec::GaussianWell, &g).unwrap();
    let m0 = 1.0;
    let mut rng = common::rng(5);
    for _ in 0..50 {
        let u = common::random_radial(&g, &mut rng, 1.0);
        let nv = norm_hv_sq(&u, &PotentialSpec::GaussianWell).unwrap();
        let np = norm_hv_sq(&u, &PotentialSpec::Constant { value: 1.0 }).unwrap();
        assert!(nv <= np * (1.0 + 1e-12));
        assert!(np <= nv * (1.0 + m0 / d1));
    }
}

#[test]
fn operations_are_bit_reproducible() {
    let g = grid();
    let u = g.sample(|r| (-(r - 1.0).powi(2)).exp()).unwrap();
    let a = (grad_seminorm_sq(&u), norm_lp(&u, 6.0), integrate(&u).unwrap());
    let b = (grad_seminorm_sq(&u), norm_lp(&u, 6.0), integrate(&u).unwrap());
    assert_eq!(a.0.to_bits(), b.0.to_bits());
    assert_eq!(a.1.to_bits(), b.1.to_bits());
    assert_eq!(a.2.to_bits(), b.2.to_bits());
}

fn smooth_fn(g: &RadialGrid, a: f64, w: f64, c: f64, k: f64) -> RadialFn {
    g.sample(|r| a * (-((r - c) / w).powi(2)).exp() * (1.0 + 0.3 * (k * r).sin()))
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lp_norm_is_absolutely_homogeneous(c in -50.0f64..50.0, p in 1.0f64..8.0, w in 0.5f64..4.0) {
        let g = RadialGrid::new(3, 1024, 20.0).unwrap();
        let u = smooth_fn(&g, 1.0, w, 0.0, 1.0);
        let lhs = norm_lp(&u.scale(c), p);
        let rhs = c.abs() * norm_lp(&u, p);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
    }

    #[test]
    fn integral_is_linear_and_monotone(a in 0.1f64..3.0, b in 0.1f64..3.0, s in -2.0f64..2.0, t in -2.0f64..2.0) {
        let g = RadialGrid::new(3, 1024, 20.0).unwrap();
        let d1 = g.sample(|r| (-(r / a).powi(2)).exp()).unwrap();
        let d2 = g.sample(|r| (-(r / b).powi(2)).exp()).unwrap();
        let comb = d1.scale(s).axpy(t, &d2).unwrap();
        let lin = s * integrate(&d1).unwrap() + t * integrate(&d2).unwrap();
        prop_assert!((integrate(&comb).unwrap() - lin).abs() <= 1e-12 * (1.0 + lin.abs()));
        let upper = d1.axpy(1.0, &d2.map(|v| v * v)).unwrap();
        prop_assert!(integrate(&d1).unwrap() <= integrate(&upper).unwrap());
    }

    #[test]
    fn discrete_sobolev_inequality(a in -3.0f64..3.0, w in 0.3f64..5.0, c in 0.0f64..4.0, k in 0.0f64..4.0) {
        prop_assume!(a.abs() > 1e-3);
        let g = RadialGrid::new(3, 2048, 40.0).unwrap();
        let u = smooth_fn(&g, a, w, c, k);
        let q = grad_seminorm_sq(&u) / norm_lp(&u, 6.0).powi(2);
        prop_assert!(q >= sobolev_3d() * 0.95, "quotient {q}");
    }

    #[test]
    fn dilation_group_invariance(j in -2i32..=2, w in 1.0f64..3.0) {
        let g = RadialGrid::standard();
        let u = g.sample(|r| (-(r / w).powi(2)).exp()).unwrap();
        let v = apply_dilation(&u, 2f64.sqrt(), j);
        prop_assert!(rel(grad_seminorm_sq(&v), grad_seminorm_sq(&u)) < 0.02);
        prop_assert!(rel(norm_lp(&v, 6.0), norm_lp(&u, 6.0)) < 0.02);
    }
}
