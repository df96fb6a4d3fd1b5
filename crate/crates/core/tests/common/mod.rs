//! Independent oracles shared by the integration tests. Nothing here calls into
//! the library's quadrature, differentiation or solvers.

#![allow(dead_code)]

use crit_elliptic::radial::{RadialFn, RadialGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Adaptive Simpson quadrature of `f` on [a, b].
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Simpson over consecutive pieces, useful when the integrand has scales spread over decades.
pub fn simpson_pieces(f: &dyn Fn(f64) -> f64, breaks: &[f64], tol: f64) -> f64 {
    breaks.windows(2).map(|w| simpson(f, w[0], w[1], tol)).sum()
}

/// ∫_{ℝ³} g(|x|) dx for a radial profile, integrated on [0, r_max].
pub fn radial_integral_3d(g: &dyn Fn(f64) -> f64, r_max: f64, tol: f64) -> f64 {
    let h = |r: f64| 4.0 * PI * r * r * g(r);
    let breaks: Vec<f64> = [0.0, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0]
        .into_iter()
        .filter(|&x| x < r_max)
        .chain(std::iter::once(r_max))
        .collect();
    simpson_pieces(&h, &breaks, tol)
}

/// Closed-form best Sobolev constant in three dimensions.
pub fn sobolev_3d() -> f64 {
    3.0 * (PI / 2.0).powf(4.0 / 3.0)
}

/// (1/N) S^{N/2} in three dimensions.
pub fn critical_level_3d() -> f64 {
    sobolev_3d().powf(1.5) / 3.0
}

/// Result of shooting for the positive radial solution of -u'' - (2/r)u' + u = u³.
#[derive(Debug, Clone, Copy)]
pub struct Shot {
    pub u0: f64,
    pub energy: f64,
    pub kinetic: f64,
    pub l2: f64,
    pub l4: f64,
}

enum Fate {
    Crossed,
    TurnedUp,
    Undecided,
}

fn shoot_once(u0: f64, h: f64, r_end: f64, acc: Option<&mut [f64; 3]>) -> Fate {
    // near r = 0: u = u0 + c r², 6c = u0 - u0³
    let c = (u0 - u0.powi(3)) / 6.0;
    let mut r = 1e-4;
    let mut y = [u0 + c * r * r, 2.0 * c * r];
    let rhs = |r: f64, y: [f64; 2]| [y[1], y[0] - y[0].powi(3) - 2.0 / r * y[1]];
    let mut sums = [0.0; 3];
    let mut fate = Fate::Undecided;
    while r < r_end {
        let k1 = rhs(r, y);
        let k2 = rhs(r + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
        let k3 = rhs(r + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
        let k4 = rhs(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        let next = [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        // trapezoid in r of the three densities
        let w = |y: [f64; 2], r: f64| [y[1] * y[1] * r * r, y[0] * y[0] * r * r, y[0].powi(4) * r * r];
        let (a, b) = (w(y, r), w(next, r + h));
        for k in 0..3 {
            sums[k] += 0.5 * h * (a[k] + b[k]);
        }
        y = next;
        r += h;
        if y[0] < 0.0 {
            fate = Fate::Crossed;
            break;
        }
        if y[1] > 0.0 {
            fate = Fate::TurnedUp;
            break;
        }
        if y[0] < 1e-7 {
            break;
        }
    }
    if let Some(out) = acc {
        *out = sums;
    }
    fate
}

/// Bisection on u(0) between undershoot (u turns up) and overshoot (u crosses zero),
/// with energy ½∫|∇u|² + u² − ¼∫u⁴ accumulated along the accepted trajectory.
pub fn shoot_cubic_3d() -> Shot {
    let h = 2e-4;
    let (mut lo, mut hi) = (3.0, 6.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        match shoot_once(mid, h, 30.0, None) {
            Fate::Crossed => hi = mid,
            Fate::TurnedUp | Fate::Undecided => lo = mid,
        }
    }
    let u0 = 0.5 * (lo + hi);
    let mut s = [0.0; 3];
    shoot_once(lo, h, 30.0, Some(&mut s));
    let [k, l2, l4] = s.map(|v| 4.0 * PI * v);
    Shot {
        u0,
        energy: 0.5 * (k + l2) - 0.25 * l4,
        kinetic: k,
        l2,
        l4,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A smooth random radial function: a few Gaussians with random signs, widths and centres.
pub fn random_radial(grid: &RadialGrid, rng: &mut ChaCha8Rng, scale: f64) -> RadialFn {
    let terms: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                scale * rng.gen_range(-1.0..1.0),
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.0..3.0),
            )
        })
        .collect();
    grid.sample(|r| {
        terms
            .iter()
            .map(|(a, w, c)| a * (-((r - c) / w).powi(2)).exp())
            .sum()
    })
    .expect("finite samples")
}

/// A smooth random positive radial bump.
pub fn random_bump(grid: &RadialGrid, rng: &mut ChaCha8Rng, amp: f64) -> RadialFn {
    let a = amp * rng.gen_range(0.3..1.0);
    let w = rng.gen_range(0.7..2.5);
    grid.sample(|r| a * (-(r / w).powi(2)).exp()).expect("finite samples")
}

/// Relative difference with an absolute floor.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
