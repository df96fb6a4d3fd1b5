use crit_elliptic::nonlinearity::{NonlinearitySpec, OscCriticalParams};
use crit_elliptic::profiles::{
    apply_group, bilinear_overlap_decay, decompose, separation, splitting_inequality_constant, synthesize_sequence,
    synthesize_vanishing, verify_tinta_invariants, GridFn, GroupElement, ProfileClass, StopReason, SynthesisConfig,
};
use crit_elliptic::Error;
use proptest::prelude::*;
use std::f64::consts::PI;

const TWO_STAR: f64 = 6.0;

fn gamma() -> f64 {
    2f64.powf(0.25)
}

fn at(y: [i64; 3], j: i32) -> GroupElement {
    GroupElement { y: y.to_vec(), j, gamma: gamma() }
}

fn bump(radius: f64) -> GridFn {
    GridFn::bump(16.0, 64, 3, 1.0, radius).unwrap()
}

fn rel_diff(a: &GridFn, b: &GridFn) -> f64 {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    d.norm_lp(TWO_STAR) / b.norm_lp(TWO_STAR)
}

#[test]
fn single_fixed_profile_is_reproduced() {
    let w = bump(3.0);
    let seq = synthesize_sequence(&[w.clone()], &[vec![at([0, 0, 0], 0); 5]], 0.0, 5).unwrap();
    assert!(seq.iter().all(|u| *u == w));
}

#[test]
fn constant_sequence_has_one_profile_and_no_remainder() {
    let w = bump(3.0);
    let seq = vec![w.clone(); 8];
    let d = decompose(&seq, gamma(), 4, 1e-3).unwrap();
    assert_eq!(d.profiles.len(), 1);
    assert_eq!(d.labels, vec![ProfileClass::N0]);
    assert!(d.schedules[0].iter().all(|g| g.y == vec![0, 0, 0] && g.j == 0));
    assert!(d.remainder_norms.iter().all(|r| *r < 1e-3 * w.norm_lp(TWO_STAR)));
    assert!(verify_tinta_invariants(&d, &seq, 1e-6).unwrap().all_ok);
}

#[test]
fn zero_sequence_gives_an_empty_decomposition() {
    let seq = vec![GridFn::zeros(16.0, 32, 3).unwrap(); 4];
    let d = decompose(&seq, gamma(), 3, 1e-3).unwrap();
    assert!(d.profiles.is_empty());
    let r = verify_tinta_invariants(&d, &seq, 1e-6).unwrap();
    assert!(r.all_ok && r.separation.is_empty());
}

#[test]
fn vanishing_sequence_has_no_profiles() {
    let seq = synthesize_vanishing(16.0, 64, 3, 0.5, 16).unwrap();
    let norms: Vec<f64> = seq.iter().map(|u| u.norm_lp(TWO_STAR)).collect();
    assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
    let grads: Vec<f64> = seq.iter().map(GridFn::grad_sq).collect();
    assert!(grads.iter().all(|g| (g / grads[0] - 1.0).abs() < 0.2), "{grads:?}");
    let d = decompose(&seq, gamma(), 3, 1e-3).unwrap();
    assert!(d.profiles.is_empty());
    assert_eq!(d.stop_reason, StopReason::NoReduction);
}

#[test]
fn translated_bumps_stop_overlapping() {
    let w = bump(2.0);
    let s1: Vec<GroupElement> = (0..7).map(|k| at([-2 * k, 0, 0], 0)).collect();
    let s2: Vec<GroupElement> = (0..7).map(|k| at([2 * k, 0, 0], 0)).collect();
    let o = bilinear_overlap_decay(&w, &w, &s1, &s2).unwrap();
    assert!(o[0] > 0.0);
    assert!(o.windows(2).all(|p| p[1] <= p[0]), "{o:?}");
    // disjoint supports once |Δy| = 4k reaches twice the radius plus a cell
    assert!(o[2..].iter().all(|v| *v == 0.0), "{o:?}");
}

#[test]
fn concentrating_bump_overlap_decays() {
    let w = bump(4.0);
    let fixed: Vec<GroupElement> = (0..5).map(|_| at([2, 0, 0], 0)).collect();
    let conc: Vec<GroupElement> = (0..5).map(|j| at([0, 0, 0], j)).collect();
    let o = bilinear_overlap_decay(&w, &w, &fixed, &conc).unwrap();
    let xs: Vec<f64> = (0..o.len()).map(|j| j as f64).collect();
    let ys: Vec<f64> = o.iter().map(|v| v.ln()).collect();
    let (xb, yb) = (xs.iter().sum::<f64>() / 5.0, ys.iter().sum::<f64>() / 5.0);
    let slope: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xb) * (y - yb)).sum::<f64>()
        / xs.iter().map(|x| (x - xb).powi(2)).sum::<f64>();
    assert!(slope < 0.0, "slope {slope}, overlaps {o:?}");
}

#[test]
fn dilations_preserve_the_critical_norms() {
    // the forward-difference gradient reads low once the dilated bump spans only a few cells
    let w = bump(6.0);
    let (n0, g0) = (w.norm_lp(TWO_STAR), w.grad_sq());
    for j in 1..=4 {
        let d = apply_group(&w, &at([0, 0, 0], j));
        assert!((d.norm_lp(TWO_STAR) / n0 - 1.0).abs() < 0.03, "j = {j}: {}", d.norm_lp(TWO_STAR) / n0);
        assert!((d.grad_sq() / g0 - 1.0).abs() < 0.03, "j = {j}: {}", d.grad_sq() / g0);
    }
}

#[test]
fn bump_leaving_the_box_is_reported() {
    let w = bump(3.0);
    let sched: Vec<GroupElement> = (0..4).map(|k| at([5 * k, 0, 0], 0)).collect();
    let r = synthesize_sequence(&[w], &[sched], 0.0, 4);
    assert!(matches!(r, Err(Error::BumpLeavesBox { k: 3, n: 0 })), "{r:?}");
}

#[test]
fn round_trip_recovers_the_default_configuration() {
    let cfg = SynthesisConfig::default();
    let (truth, schedules, seq) = cfg.synthesize().unwrap();
    let d = decompose(&seq, cfg.gamma, 5, 0.05).unwrap();
    assert_eq!(d.profiles.len(), 3);
    assert_eq!(d.labels, vec![ProfileClass::N0, ProfileClass::N0, ProfileClass::Nplus]);
    assert_eq!(d.schedules[0][0].y, vec![0, 0, 0]);

    // compare d_K w against the ground truth at the last index, which is gauge free
    let last = cfg.length - 1;
    for (n, w) in truth.iter().enumerate() {
        let target = apply_group(w, &schedules[n][last]);
        let err = (0..d.profiles.len())
            .map(|m| rel_diff(&apply_group(&d.profiles[m], &d.schedules[m][last]), &target))
            .fold(f64::INFINITY, f64::min);
        assert!(err < 0.05, "profile {n}: error {err}");
    }

    let r = verify_tinta_invariants(&d, &seq, 1e-6).unwrap();
    assert!(r.all_ok, "{r:?}");
    assert!(d.ledger.sum <= d.ledger.limsup + 1e-6);
    for (w, s) in d.profiles.iter().zip(&d.schedules) {
        let g0 = w.grad_sq();
        for g in s {
            assert!((apply_group(w, g).grad_sq() / g0 - 1.0).abs() < 0.03);
        }
    }

    // two profiles riding the same schedule violate the separation requirement
    let mut merged = d.clone();
    merged.schedules[1] = merged.schedules[0].clone();
    let r = verify_tinta_invariants(&merged, &seq, 1e-6).unwrap();
    assert!(!r.separation_ok);
    assert!(r.offending_pairs().contains(&(0, 1)));
}

#[test]
fn splitting_constant_of_the_critical_power() {
    let g = NonlinearitySpec::critical_power(3);
    let big_g = |s: f64| g.primitive(s);
    // two summands reduce by homogeneity to (1, t); scan t densely
    let ratio = |t: f64| {
        let lhs = (big_g(1.0 + t) - big_g(1.0) - big_g(t)).abs();
        let rhs = t.abs() + t.abs().powi(5);
        lhs / rhs
    };
    let oracle = (1..=400_000)
        .map(|k| -20.0 + 40.0 * k as f64 / 400_000.0)
        .flat_map(|x: f64| [x.exp(), -x.exp()])
        .map(ratio)
        .fold(0.0, f64::max);
    let est = splitting_inequality_constant(&g, 3, 2, 2000).unwrap();
    assert!(est.constant.is_finite() && est.stable);
    assert!(est.constant <= oracle * (1.0 + 1e-9), "{} vs {oracle}", est.constant);
    assert!(est.constant >= 0.8 * oracle, "{} vs {oracle}", est.constant);
    assert_eq!(big_g(1.7 + 0.0) - big_g(1.7) - big_g(0.0), 0.0);
}

#[test]
fn splitting_ratio_is_periodic_in_log_magnitude() {
    let p = OscCriticalParams { dim: 3, a: 0.2, b: 0.02, e: 0.1, omega: 4.0 * PI };
    let g = NonlinearitySpec::OscCritical(p);
    let lam = p.gamma().sqrt();
    let ratio = |a: f64, b: f64| {
        (g.primitive(a + b) - g.primitive(a) - g.primitive(b)).abs()
            / (a.abs().powi(5) * b.abs() + b.abs().powi(5) * a.abs())
    };
    for (a, b) in [(1.0, 0.3), (0.2, -0.9), (3.0, 2.5), (-0.01, 0.04)] {
        let r0 = ratio(a, b);
        let r1 = ratio(lam * a, lam * b);
        assert!((r1 / r0 - 1.0).abs() < 1e-9, "{a}, {b}: {r0} vs {r1}");
    }
    let est = splitting_inequality_constant(&g, 3, 2, 2000).unwrap();
    assert!(est.constant.is_finite() && est.stable);
}

#[test]
fn splitting_constant_rejects_bad_arguments() {
    let g = NonlinearitySpec::critical_power(3);
    assert!(splitting_inequality_constant(&g, 3, 1, 10).is_err());
    assert!(splitting_inequality_constant(&g, 3, 6, 10).is_err());
    assert!(splitting_inequality_constant(&g, 3, 2, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn separation_dominates_the_dilation_gap(ya in -8i64..8, yb in -8i64..8, ja in -3i32..4, jb in -3i32..4) {
        let (a, b) = (at([ya, 0, 0], ja), at([yb, 1, 0], jb));
        let s = separation(&a, &b);
        prop_assert!(s >= (ja - jb).abs() as f64);
        prop_assert!(s >= gamma().powi(ja) * ((ya - yb).pow(2) as f64 + 1.0).sqrt() - 1e-12);
    }

    #[test]
    fn identity_action_changes_nothing(radius in 1.5f64..5.0, amp in 0.1f64..2.0) {
        let w = GridFn::bump(8.0, 32, 3, amp, radius).unwrap();
        let d = apply_group(&w, &GroupElement::identity(3, gamma()));
        prop_assert!(rel_diff(&d, &w) < 1e-12);
    }
}
