//! Sobolev-type constants: 𝕊, 𝕊_Ḡ (and 𝕊_Ḡb), the dual sup-form 𝕂_Ḡ, and the
//! derived κ*, μ*, λ*.

use crate::error::{Error, Result};
use crate::hypothesis::{kappa_star, lambda_star, mu_star};
use crate::linalg::solve_tridiagonal;
use crate::nonlinearity::NonlinearitySpec;
use crate::radial::{critical_exponent, talenti, RadialFn, RadialGrid};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Stiffness of ‖∇u‖² on the free nodes, with the trapezoid masses.
struct Dirichlet {
    grid: RadialGrid,
    mass: Vec<f64>,
    edge: Vec<f64>,
    sub: Vec<f64>,
    diag: Vec<f64>,
}

impl Dirichlet {
    fn new(grid: RadialGrid) -> Self {
        let mass = grid.masses();
        let edge = grid.edges();
        let m = grid.nodes();
        let diag = (0..m)
            .map(|i| if i > 0 { edge[i - 1] } else { 0.0 } + edge[i])
            .collect();
        let sub = (0..m - 1).map(|i| -edge[i]).collect();
        Self {
            grid,
            mass,
            edge,
            sub,
            diag,
        }
    }

    fn kinetic(&self, u: &[f64]) -> f64 {
        u.windows(2)
            .zip(&self.edge)
            .map(|(w, e)| e * (w[1] - w[0]).powi(2))
            .sum()
    }

    /// A⁻¹ r on the free nodes, extended by 0 at R_max.
    fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        let m = self.grid.nodes();
        let mut z = solve_tridiagonal(&self.sub, &self.diag, &self.sub, &r[..m])?;
        z.push(0.0);
        Ok(z)
    }

    fn integral(&self, u: &[f64], f: impl Fn(f64) -> f64 + Sync) -> f64 {
        u.iter().zip(&self.mass).map(|(&x, &m)| if m == 0.0 { 0.0 } else { m * f(x) }).sum()
    }
}

/// Talenti bubble minus its value at R_max, so the Dirichlet condition holds.
pub fn truncated_bubble(grid: &RadialGrid, eps: f64) -> RadialFn {
    let n = grid.dim();
    let edge = talenti(n, eps, grid.r_max());
    RadialFn::from_raw(*grid, (0..grid.len()).map(|i| talenti(n, eps, grid.r(i)) - edge).collect())
}

/// ‖∇u‖² / ‖u‖_{2*}² on the grid.
pub fn sobolev_quotient(u: &RadialFn) -> f64 {
    let d = Dirichlet::new(*u.grid());
    let q = critical_exponent(u.grid().dim());
    let l = d.integral(u.values(), |x| x.abs().powf(q));
    d.kinetic(u.values()) / l.powf(2.0 / q)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Minimizes the quotient over ε on the truncated bubble family; returns (ε, quotient).
pub fn bubble_quotient_min(grid: &RadialGrid) -> (f64, f64) {
    let logs: Vec<f64> = (0..=40).map(|k| -8.0 + 0.4 * k as f64).collect();
    let vals: Vec<f64> = logs
        .par_iter()
        .map(|&l| sobolev_quotient(&truncated_bubble(grid, l.exp())))
        .collect();
    let k = vals
        .iter()
        .enumerate()
        .fold(0, |b, (i, v)| if *v < vals[b] { i } else { b });
    let lo = logs[k.saturating_sub(1)];
    let hi = logs[(k + 1).min(logs.len() - 1)];
    let (l, v) = golden_min(|l| sobolev_quotient(&truncated_bubble(grid, l.exp())), lo, hi, 60);
    (l.exp(), v)
}

/// Outcome of a constrained descent.
#[derive(Debug, Clone)]
pub struct Descent {
    pub value: f64,
    pub minimizer: RadialFn,
    pub iterations: usize,
}

/// Smallest c > 0 (from a doubling scan) with ∫Ḡ(c u) = 1.
fn normalize_amplitude(d: &Dirichlet, gbar: &(dyn Fn(f64) -> f64 + Sync), u: &[f64]) -> Result<Vec<f64>> {
    let phi = |c: f64| d.integral(u, |x| gbar(c * x));
    let mut c = 1.0;
    let mut steps = 0;
    while phi(c) >= 1.0 {
        c *= 0.5;
        steps += 1;
        if steps > 400 {
            return Err(Error::ConstraintNotAttainable);
        }
    }
    while phi(2.0 * c) < 1.0 {
        c *= 2.0;
        steps += 1;
        if steps > 400 || !c.is_finite() {
            return Err(Error::ConstraintNotAttainable);
        }
    }
    // Illinois regula falsi on the bracket [c, 2c]
    let (mut a, mut b) = (c, 2.0 * c);
    let (mut fa, mut fb) = (phi(a) - 1.0, phi(b) - 1.0);
    let mut side = 0;
    for _ in 0..100 {
        let x = (a * fb - b * fa) / (fb - fa);
        let fx = phi(x) - 1.0;
        if fx == 0.0 || (b - a).abs() <= 1e-15 * b {
            a = x;
            fa = fx;
            b = x;
            fb = fx;
            break;
        }
        if fx < 0.0 {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if fx.abs() < 1e-14 {
            break;
        }
    }
    let c = if fa.abs() < fb.abs() { a } else { b };
    Ok(u.iter().map(|x| c * x).collect())
}

/// Minimizes ‖∇u‖² subject to ∫Ḡ(u) = 1 by Sobolev-gradient steps with Armijo
/// backtracking, re-normalizing the amplitude after every step.
pub fn constrained_descent(
    grid: &RadialGrid,
    gbar: &(dyn Fn(f64) -> f64 + Sync),
    gbar_prime: &(dyn Fn(f64) -> f64 + Sync),
    start: &RadialFn,
    max_iter: usize,
) -> Result<Descent> {
    let d = Dirichlet::new(*grid);
    let mut u = normalize_amplitude(&d, gbar, start.values())?;
    let mut k = d.kinetic(&u);
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let rhs: Vec<f64> = u.iter().zip(&d.mass).map(|(&x, &m)| m * gbar_prime(x)).collect();
        let pair: f64 = rhs.iter().zip(&u).map(|(a, b)| a * b).sum();
        let w = d.solve(&rhs)?;
        let scale = k / pair;
        let z: Vec<f64> = u.iter().zip(&w).map(|(x, y)| x - scale * y).collect();
        let zn = d.kinetic(&z);
        if zn <= 1e-24 * k {
            break;
        }
        let mut tau = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = u.iter().zip(&z).map(|(x, y)| x - tau * y).collect();
            if let Ok(t) = normalize_amplitude(&d, gbar, &trial) {
                let kt = d.kinetic(&t);
                if kt < k {
                    accepted = Some((t, kt));
                    break;
                }
            }
            tau *= 0.5;
        }
        match accepted {
            Some((t, kt)) => {
                let rel = (k - kt) / k;
                u = t;
                k = kt;
                if rel < 1e-13 {
                    break;
                }
            }
            None => break,
        }
    }
    Ok(Descent {
        value: k,
        minimizer: RadialFn::from_raw(*grid, u),
        iterations: it,
    })
}

/// 𝕊 on the grid: the best truncated bubble, then a descent refinement; the smaller value.
pub fn compute_s(grid: &RadialGrid) -> Result<f64> {
    let (eps, q) = bubble_quotient_min(grid);
    let p = critical_exponent(grid.dim());
    let gbar = move |x: f64| x.abs().powf(p);
    let gbar_prime = move |x: f64| p * x.abs().powf(p - 2.0) * x;
    let d = constrained_descent(grid, &gbar, &gbar_prime, &truncated_bubble(grid, eps), 400)?;
    Ok(q.min(d.value))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SGbarResult {
    #[serde(with = "crate::serde_num")]
    pub value: f64,
    /// Values reached from each restart, in restart order.
    #[serde(with = "crate::serde_num::vec")]
    pub restart_values: Vec<f64>,
    /// (max − min)/min over restarts.
    #[serde(with = "crate::serde_num")]
    pub spread: f64,
    pub warning: Option<String>,
    #[serde(skip)]
    pub minimizer: Option<RadialFn>,
}

/// Ḡ(s) = g(s)s and Ḡ′(s) = g′(s)s + g(s) for a critical family.
pub fn gbar_pair(g: &NonlinearitySpec) -> (impl Fn(f64) -> f64 + Sync + '_, impl Fn(f64) -> f64 + Sync + '_) {
    (
        move |x: f64| g.value(x) * x,
        move |x: f64| {
            let (v, _, dv) = g.triple(x);
            dv * x + v
        },
    )
}

/// 𝕊_Ḡ from `restarts` bubbles at dilation levels γ^j, j centred on 0
/// (j = −2..=2 for five restarts); the best value wins.
pub fn compute_s_gbar(g: &NonlinearitySpec, grid: &RadialGrid, restarts: usize) -> Result<SGbarResult> {
    if restarts == 0 {
        return Err(Error::EmptyInput("restarts"));
    }
    if g.is_zero() {
        return Err(Error::CriticalFamilyRequired);
    }
    let gamma = g.gamma().unwrap_or(2.0);
    let half = (restarts as i32 - 1) / 2;
    // the most concentrated seed spans about six cells
    let eps0 = (6.0 * grid.step() * gamma.powi(half)).powi(2);
    let levels: Vec<i32> = (0..restarts as i32).map(|k| k - half).collect();
    let (gbar, gbar_prime) = gbar_pair(g);
    let runs: Vec<Result<Descent>> = levels
        .par_iter()
        .map(|&j| {
            // √ε is the bubble radius; dilation by γ^j rescales it by γ^{−j}
            let eps = eps0 * gamma.powi(-2 * j);
            let start = truncated_bubble(grid, eps);
            constrained_descent(grid, &gbar, &gbar_prime, &start, 600)
        })
        .collect();
    let mut best: Option<Descent> = None;
    let mut values = Vec::with_capacity(runs.len());
    for r in runs {
        let d = r?;
        values.push(d.value);
        if best.as_ref().map_or(true, |b| d.value < b.value) {
            best = Some(d);
        }
    }
    let best = best.expect("at least one restart");
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / lo;
    Ok(SGbarResult {
        value: best.value,
        restart_values: values,
        spread,
        warning: (spread > 0.02).then(|| format!("restart spread {:.2}% exceeds 2%", 100.0 * spread)),
        minimizer: Some(best.minimizer),
    })
}

/// 𝕂_Ḡ = sup ∫Ḡ(v) over ‖∇v‖ = 1, by projected Sobolev-gradient ascent from
/// the rescaled minimizer. Returns (value, maximizer).
pub fn compute_k_gbar_from(g: &NonlinearitySpec, start: &RadialFn, max_iter: usize) -> Result<(f64, RadialFn)> {
    let grid = *start.grid();
    let d = Dirichlet::new(grid);
    let (gbar, gbar_prime) = gbar_pair(g);
    let unit = |v: &[f64]| -> Vec<f64> {
        let n = d.kinetic(v).sqrt();
        v.iter().map(|x| x / n).collect()
    };
    if start.is_zero() {
        return Err(Error::InvalidParameter("zero start is infeasible on the unit sphere".into()));
    }
    let mut v = unit(start.values());
    let mut p = d.integral(&v, &gbar);
    for _ in 0..max_iter {
        let rhs: Vec<f64> = v.iter().zip(&d.mass).map(|(&x, &m)| m * gbar_prime(x)).collect();
        let pair: f64 = rhs.iter().zip(&v).map(|(a, b)| a * b).sum();
        let w = d.solve(&rhs)?;
        let t: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a - pair * b).collect();
        let tn = d.kinetic(&t);
        if tn <= 1e-26 * pair * pair {
            break;
        }
        let mut tau = 1.0 / pair.abs().max(1e-300);
        let mut accepted = None;
        for _ in 0..40 {
            let trial = unit(&v.iter().zip(&t).map(|(a, b)| a + tau * b).collect::<Vec<_>>());
            let pt = d.integral(&trial, &gbar);
            if pt > p {
                accepted = Some((trial, pt));
                break;
            }
            tau *= 0.5;
        }
        match accepted {
            Some((trial, pt)) => {
                let rel = (pt - p) / p;
                v = trial;
                p = pt;
                if rel < 1e-13 {
                    break;
                }
            }
            None => break,
        }
    }
    Ok((p, RadialFn::from_raw(grid, v)))
}

pub fn compute_k_gbar(g: &NonlinearitySpec, grid: &RadialGrid) -> Result<f64> {
    let s = compute_s_gbar(g, grid, 5)?;
    let start = s.minimizer.expect("minimizer recorded");
    compute_k_gbar_from(g, &start, 600).map(|r| r.0)
}

/// (κ*, μ*, λ*) together with the flags of (g3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    #[serde(with = "crate::serde_num")]
    pub kappa_star: f64,
    #[serde(with = "crate::serde_num")]
    pub mu_star: f64,
    #[serde(with = "crate::serde_num")]
    pub lambda_star: f64,
    /// κ* < N/2.
    pub kappa_ok: bool,
    /// μ* ≥ 2N/(N − 2κ*).
    pub mu_ok: bool,
}

pub fn derive_kappa_mu_lambda(g: &NonlinearitySpec, dim: usize, b0: f64, b_sup: f64, s: f64, s_gbar: f64) -> Derived {
    let n = dim as f64;
    let kappa = kappa_star(g, dim, b0, b_sup, s, s_gbar);
    let mu = mu_star(g, dim);
    let kappa_ok = kappa < n / 2.0;
    Derived {
        kappa_star: kappa,
        mu_star: mu,
        lambda_star: lambda_star(g, dim),
        kappa_ok,
        mu_ok: kappa_ok && mu >= 2.0 * n / (n - 2.0 * kappa) * (1.0 - 1e-12),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsReport {
    #[serde(rename = "S", with = "crate::serde_num")]
    pub s: f64,
    #[serde(rename = "S_Gbar", with = "crate::serde_num")]
    pub s_gbar: f64,
    #[serde(rename = "S_Gbar_b", with = "crate::serde_num")]
    pub s_gbar_b: f64,
    #[serde(rename = "K_Gbar", with = "crate::serde_num")]
    pub k_gbar: f64,
    /// |𝕊_Ḡ 𝕂_Ḡ^{2/2*} − 1|.
    #[serde(with = "crate::serde_num")]
    pub duality_residual: f64,
    #[serde(with = "crate::serde_num")]
    pub kappa_star: f64,
    #[serde(with = "crate::serde_num")]
    pub mu_star: f64,
    #[serde(with = "crate::serde_num")]
    pub lambda_star: f64,
    pub kappa_ok: bool,
    pub mu_ok: bool,
    pub nodes: usize,
    #[serde(with = "crate::serde_num")]
    pub r_max: f64,
    pub restarts: usize,
    #[serde(with = "crate::serde_num")]
    pub restart_spread: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub minimizer: Option<RadialFn>,
}

/// All constants for a critical family and coefficient bounds.
pub fn compute_constants(g: &NonlinearitySpec, grid: &RadialGrid, b0: f64, b_sup: f64, restarts: usize) -> Result<ConstantsReport> {
    if g.is_zero() {
        return Err(Error::CriticalFamilyRequired);
    }
    let dim = grid.dim();
    let q = critical_exponent(dim);
    let s = compute_s(grid)?;
    let mut sg = compute_s_gbar(g, grid, restarts)?;
    let mut minimizer = sg.minimizer.clone().expect("minimizer recorded");
    let (k, maximizer) = compute_k_gbar_from(g, &minimizer, 600)?;
    // the maximizer is also a feasible seed for the infimum
    let (gbar, gbar_prime) = gbar_pair(g);
    let polish = constrained_descent(grid, &gbar, &gbar_prime, &maximizer, 600)?;
    if polish.value < sg.value {
        sg.value = polish.value;
        minimizer = polish.minimizer;
    }
    let derived = derive_kappa_mu_lambda(g, dim, b0, b_sup, s, sg.value);
    let mut warnings: Vec<String> = sg.warning.iter().cloned().collect();
    let duality_residual = (sg.value * k.powf(2.0 / q) - 1.0).abs();
    if duality_residual > 1e-2 {
        warnings.push(format!("S_Gbar K_Gbar^(2/2*) differs from 1 by {duality_residual:.3e}"));
    }
    Ok(ConstantsReport {
        s,
        s_gbar: sg.value,
        s_gbar_b: b_sup.powf(-2.0 / q) * sg.value,
        k_gbar: k,
        duality_residual,
        kappa_star: derived.kappa_star,
        mu_star: derived.mu_star,
        lambda_star: derived.lambda_star,
        kappa_ok: derived.kappa_ok,
        mu_ok: derived.mu_ok,
        nodes: grid.nodes(),
        r_max: grid.r_max(),
        restarts,
        restart_spread: sg.spread,
        warnings,
        minimizer: Some(minimizer),
    })
}
