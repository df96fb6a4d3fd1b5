//! Ground states on radial grids: mountain-pass path deformation, Nehari
//! descent, Newton polishing, and the bubble paths used for minimax bounds.

use crate::constants::ConstantsReport;
use crate::energy::{default_t_grid, eval_i, scaled_dilated_energy, tabulate_max, Assembled, Functional, ProblemSpec};
use crate::error::{Error, Result};
use crate::hypothesis::check_h_monotone;
use crate::linalg::solve_tridiagonal;
use crate::radial::{critical_exponent, logspace, norm_lp, sobolev_constant_exact, RadialFn, RadialGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Target for ‖I′(u)‖_* / ‖u‖_V.
    #[serde(with = "crate::serde_num")]
    pub tol: f64,
    pub max_iter: usize,
    pub path_nodes: usize,
    /// Relative residual below which Newton takes over.
    #[serde(with = "crate::serde_num")]
    pub newton_switch: f64,
    pub stagnation_window: usize,
    pub rng_seed: u64,
    #[serde(skip)]
    pub seed: Option<RadialFn>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 5000,
            path_nodes: 64,
            newton_switch: 1e-2,
            stagnation_window: 200,
            rng_seed: 7,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MountainPass,
    Nehari,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathDiagnostics {
    pub nodes: usize,
    /// e = scale · seed is the path endpoint.
    #[serde(with = "crate::serde_num")]
    pub endpoint_scale: f64,
    #[serde(with = "crate::serde_num")]
    pub endpoint_energy: f64,
    pub max_node: usize,
    /// Path maximum after the deformation phase.
    #[serde(with = "crate::serde_num")]
    pub path_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub method: Method,
    #[serde(with = "crate::serde_num")]
    pub energy: f64,
    #[serde(with = "crate::serde_num")]
    pub residual_norm: f64,
    #[serde(with = "crate::serde_num")]
    pub relative_residual: f64,
    #[serde(with = "crate::serde_num::opt")]
    pub pohozaev_residual: Option<f64>,
    #[serde(with = "crate::serde_num")]
    pub norm_v: f64,
    #[serde(with = "crate::serde_num")]
    pub value_at_origin: f64,
    pub iterations: usize,
    pub newton_iterations: usize,
    pub path: Option<PathDiagnostics>,
    #[serde(skip)]
    pub solution: RadialFn,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn scaled(u: &[f64], t: f64) -> Vec<f64> {
    u.iter().map(|x| t * x).collect()
}

fn default_seed(grid: &RadialGrid) -> Result<RadialFn> {
    grid.sample(|r| (-r * r).exp())
}

fn relative(a: &Assembled, u: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
    let (res, z, _) = a.residual(u)?;
    let n = a.norm_sq(u).sqrt();
    Ok((res, if n > 0.0 { res / n } else { f64::INFINITY }, z))
}

/// Damped Newton on I′(u) = 0 with the tridiagonal Jacobian.
fn newton_polish(a: &Assembled, mut u: Vec<f64>, tol: f64) -> Result<(Vec<f64>, usize)> {
    let m = a.grid.nodes();
    let (_, mut rel, _) = relative(a, &u)?;
    let mut it = 0;
    while it < 60 {
        if rel < tol * 1e-3 {
            break;
        }
        it += 1;
        let g = a.gradient(&u);
        let (sub, diag, sup) = a.jacobian(&u);
        let step = solve_tridiagonal(&sub, &diag, &sup, &g[..m])?;
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let mut trial = u.clone();
            for (x, d) in trial.iter_mut().zip(&step) {
                *x -= alpha * d;
            }
            if let Ok((_, r, _)) = relative(a, &trial) {
                if r < rel {
                    u = trial;
                    rel = r;
                    improved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if rel < tol {
        Ok((u, it))
    } else {
        Err(Error::Stagnated(format!("Newton polish stopped at relative residual {rel:.3e}")))
    }
}

fn finish(p: &ProblemSpec, method: Method, u: Vec<f64>, iterations: usize, newton: usize, path: Option<PathDiagnostics>) -> Result<SolveReport> {
    let a = Assembled::new(p, Functional::I);
    let (res, rel, _) = relative(&a, &u)?;
    let solution = RadialFn::new(p.grid, u)?;
    if solution.max_abs() < 1e-8 {
        return Err(Error::Stagnated("iteration collapsed to the trivial solution".into()));
    }
    let rep = eval_i(p, &solution)?;
    Ok(SolveReport {
        method,
        energy: rep.value,
        residual_norm: res,
        relative_residual: rel,
        pohozaev_residual: rep.pohozaev,
        norm_v: a.norm_sq(solution.values()).sqrt(),
        value_at_origin: solution.values()[0],
        iterations,
        newton_iterations: newton,
        path,
        solution,
    })
}

/// Point on the polyline a → b → c at parameter s ∈ [−1, 1].
fn polyline(a: &[f64], b: &[f64], c: &[f64], s: f64) -> Vec<f64> {
    if s <= 0.0 {
        let w = -s;
        b.iter().zip(a).map(|(y, x)| (1.0 - w) * y + w * x).collect()
    } else {
        b.iter().zip(c).map(|(y, z)| (1.0 - s) * y + s * z).collect()
    }
}

fn golden_max_lin(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..40 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = f(d);
        }
    }
    let s = 0.5 * (lo + hi);
    (s, f(s))
}

/// Redistributes the interior nodes uniformly in H¹_V arc length.
fn reparametrize(a: &Assembled, path: &mut [Vec<f64>]) {
    let n = path.len();
    let mut cum = vec![0.0; n];
    for k in 1..n {
        let d: Vec<f64> = path[k].iter().zip(&path[k - 1]).map(|(x, y)| x - y).collect();
        cum[k] = cum[k - 1] + a.norm_sq(&d).sqrt();
    }
    let total = cum[n - 1];
    if !(total > 0.0) {
        return;
    }
    let old = path.to_vec();
    let mut seg = 0;
    for (j, node) in path.iter_mut().enumerate().take(n - 1).skip(1) {
        let target = total * j as f64 / (n - 1) as f64;
        while seg + 1 < n - 1 && cum[seg + 1] < target {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let w = if len > 0.0 { (target - cum[seg]) / len } else { 0.0 };
        for (i, x) in node.iter_mut().enumerate() {
            *x = (1.0 - w) * old[seg][i] + w * old[seg + 1][i];
        }
    }
}

/// Mountain-pass critical point by deforming a discrete path from 0 to e.
pub fn solve_mountain_pass(p: &ProblemSpec, cfg: &SolverConfig) -> Result<SolveReport> {
    p.validate()?;
    if cfg.path_nodes < 3 {
        return Err(Error::InvalidParameter("path needs at least 3 nodes".into()));
    }
    let a = Assembled::new(p, Functional::I);
    let seed = match &cfg.seed {
        Some(s) if *s.grid() == p.grid => s.clone(),
        Some(_) => return Err(Error::GridMismatch),
        None => default_seed(&p.grid)?,
    };
    if seed.is_zero() {
        return Err(Error::InvalidParameter("seed must be nonzero".into()));
    }
    let mut scale = 1.0;
    let mut end_energy = a.energy(seed.values());
    let mut doublings = 0;
    while !(end_energy < -1.0) {
        scale *= 2.0;
        doublings += 1;
        if doublings > 64 {
            return Err(Error::NoMountainPassGeometry);
        }
        end_energy = a.energy(&scaled(seed.values(), scale));
    }
    let e = scaled(seed.values(), scale);
    let n = cfg.path_nodes;
    let mut path: Vec<Vec<f64>> = (0..n).map(|k| scaled(&e, k as f64 / (n - 1) as f64)).collect();

    let mut tau: f64 = 1.0;
    let mut last_max = f64::INFINITY;
    let mut flat = 0;
    let mut it = 0;
    let mut switch = cfg.newton_switch;
    let (u, newton, max_node, path_max) = loop {
        if it >= cfg.max_iter {
            return Err(Error::Stagnated(format!("mountain pass reached {it} iterations")));
        }
        it += 1;
        let energies: Vec<f64> = path.par_iter().map(|u| a.energy(u)).collect();
        let k = (1..n - 1).fold(1, |b, i| if energies[i] > energies[b] { i } else { b });
        let (s, _) = golden_max_lin(|s| a.energy(&polyline(&path[k - 1], &path[k], &path[k + 1], s)), -1.0, 1.0);
        let u = polyline(&path[k - 1], &path[k], &path[k + 1], s);
        let eu = a.energy(&u);
        let (res, rel, z) = relative(&a, &u)?;
        if rel < switch {
            match newton_polish(&a, u.clone(), cfg.tol) {
                Ok((v, nit)) => break (v, nit, k, eu),
                Err(e) if switch <= cfg.tol => return Err(e),
                Err(_) => switch *= 0.1,
            }
        }
        if (last_max - eu).abs() < 1e-14 * eu.abs().max(1.0) {
            flat += 1;
            if flat >= cfg.stagnation_window {
                return Err(Error::Stagnated(format!(
                    "path maximum {eu:.12e} flat for {flat} iterations, relative residual {rel:.3e}"
                )));
            }
        } else {
            flat = 0;
        }
        last_max = eu;
        // descend across the path; the next re-maximization handles the tangent
        let tan: Vec<f64> = path[k + 1].iter().zip(&path[k - 1]).map(|(x, y)| x - y).collect();
        let tn2 = a.norm_sq(&tan);
        let grad = a.gradient(&u);
        let gt = dot(&grad, &tan);
        let along = if tn2 > 0.0 { gt / tn2 } else { 0.0 };
        let d: Vec<f64> = z.iter().zip(&tan).map(|(zi, ti)| zi - along * ti).collect();
        let slope = res * res - along * gt;
        tau = (2.0 * tau).min(1.0);
        let mut moved = None;
        for _ in 0..50 {
            let trial: Vec<f64> = u.iter().zip(&d).map(|(x, di)| x - tau * di).collect();
            if a.energy(&trial) <= eu - 1e-4 * tau * slope {
                moved = Some(trial);
                break;
            }
            tau *= 0.5;
        }
        path[k] = moved.unwrap_or(u);
        reparametrize(&a, &mut path[..=k]);
        reparametrize(&a, &mut path[k..]);
    };
    let diag = PathDiagnostics {
        nodes: n,
        endpoint_scale: scale,
        endpoint_energy: end_energy,
        max_node,
        path_max,
    };
    finish(p, Method::MountainPass, u, it, newton, Some(diag))
}

/// t* > 0 with I′(t u)·(t u) = 0, by bisection in ln t on [1e−6, 1e6].
pub fn nehari_projection(p: &ProblemSpec, u: &RadialFn) -> Result<f64> {
    if *u.grid() != p.grid {
        return Err(Error::GridMismatch);
    }
    let a = Assembled::new(p, Functional::I);
    ray_root(&a, u.values())
}

fn ray_root(a: &Assembled, u: &[f64]) -> Result<f64> {
    let phi = |t: f64| {
        let tu = scaled(u, t);
        dot(&a.gradient(&tu), &tu)
    };
    let (mut lo, mut hi) = (1e-6f64, 1e6f64);
    if !(phi(lo) > 0.0 && phi(hi) < 0.0) {
        return Err(Error::NoRayRoot);
    }
    for _ in 0..200 {
        let mid = (0.5 * (lo.ln() + hi.ln())).exp();
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    Ok((0.5 * (lo.ln() + hi.ln())).exp())
}

/// Minimizes I on the Nehari set by projected Sobolev-gradient descent.
pub fn solve_nehari(p: &ProblemSpec, cfg: &SolverConfig) -> Result<SolveReport> {
    p.validate()?;
    // only the monotone alternative makes the ray projection unique
    let mono = check_h_monotone(p);
    if mono.quantity("monotone") != Some(1.0) {
        return Err(Error::Precondition(format!(
            "(f_P + k_P)/|s| is not increasing on the sample (worst relative step {:.3e} at {:?})",
            mono.worst_margin, mono.witness
        )));
    }
    let a = Assembled::new(p, Functional::I);
    let seed = match &cfg.seed {
        Some(s) if *s.grid() == p.grid => s.clone(),
        Some(_) => return Err(Error::GridMismatch),
        None => default_seed(&p.grid)?,
    };
    let mut u = scaled(seed.values(), ray_root(&a, seed.values())?);
    let mut eu = a.energy(&u);
    let mut tau: f64 = 1.0;
    let mut flat = 0;
    let mut it = 0;
    let mut switch = cfg.newton_switch;
    let (u, newton) = loop {
        if it >= cfg.max_iter {
            return Err(Error::Stagnated(format!("Nehari descent reached {it} iterations")));
        }
        it += 1;
        let (res, rel, z) = relative(&a, &u)?;
        if rel < switch {
            match newton_polish(&a, u.clone(), cfg.tol) {
                Ok(done) => break done,
                Err(e) if switch <= cfg.tol => return Err(e),
                Err(_) => switch *= 0.1,
            }
        }
        tau = (2.0 * tau).min(1.0);
        let mut accepted = None;
        for _ in 0..50 {
            let trial: Vec<f64> = u.iter().zip(&z).map(|(x, d)| x - tau * d).collect();
            if let Ok(t) = ray_root(&a, &trial) {
                let proj = scaled(&trial, t);
                let ep = a.energy(&proj);
                if ep <= eu - 1e-4 * tau * res * res {
                    accepted = Some((proj, ep));
                    break;
                }
            }
            tau *= 0.5;
        }
        let Some((next, en)) = accepted else {
            return Err(Error::Stagnated(format!("no descent step on the Nehari set at relative residual {rel:.3e}")));
        };
        if eu - en < 1e-14 * eu.abs().max(1.0) {
            flat += 1;
            if flat >= cfg.stagnation_window {
                return Err(Error::Stagnated(format!("Nehari energy flat, relative residual {rel:.3e}")));
            }
        } else {
            flat = 0;
        }
        u = next;
        eu = en;
    };
    finish(p, Method::Nehari, u, it, newton, None)
}

/// Cutoff radius used when the caller does not pick one.
pub const DEFAULT_RHO: f64 = 1.0;

/// ψ(r): 1 on [0, ϱ/2], 0 on [ϱ, ∞), quintic smoothstep between.
pub fn cutoff(r: f64, rho: f64) -> f64 {
    let x = (r - 0.5 * rho) / (0.5 * rho);
    if x <= 0.0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
    }
}

/// w_ε = ψW_ε / ‖ψW_ε‖_{2*} with W_ε = (ε + r²)^{(2−N)/2}.
pub fn normalized_bubble(grid: &RadialGrid, eps: f64, rho: f64) -> Result<RadialFn> {
    let n = grid.dim() as f64;
    let v = grid.sample(|r| cutoff(r, rho) * (eps + r * r).powf((2.0 - n) / 2.0))?;
    let norm = norm_lp(&v, critical_exponent(grid.dim()));
    Ok(v.scale(1.0 / norm))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BubblePath {
    #[serde(with = "crate::serde_num")]
    pub eps: f64,
    #[serde(with = "crate::serde_num")]
    pub rho: f64,
    pub j_k: i32,
    #[serde(with = "crate::serde_num")]
    pub gamma: f64,
    #[serde(with = "crate::serde_num::vec")]
    pub t: Vec<f64>,
    /// I(ζ(t)) on `t`.
    #[serde(with = "crate::serde_num::vec")]
    pub values: Vec<f64>,
    #[serde(with = "crate::serde_num")]
    pub t_star: f64,
    #[serde(with = "crate::serde_num")]
    pub max: f64,
    /// The path ends below zero, so it joins 0 to the negative region.
    pub admissible: bool,
    #[serde(skip)]
    pub w: RadialFn,
}

impl BubblePath {
    /// ζ(t)(x) = γ^{(N−2)j/2} w(γ^j x / t) sampled on the bubble's grid.
    pub fn zeta(&self, t: f64) -> RadialFn {
        let n = self.w.grid().dim() as f64;
        // dilate(w, λ) already carries λ^{(N−2)/2} with λ = γ^j/t
        let lambda = self.gamma.powi(self.j_k) / t;
        crate::radial::dilate(&self.w, lambda).scale(t.powf((n - 2.0) / 2.0))
    }
}

fn check_bubble_args(grid: &RadialGrid, eps: f64, rho: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("bubble parameter eps must lie in (0,1), got {eps}")));
    }
    if !(rho > 0.0 && rho <= grid.r_max() / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "cutoff radius {rho} must lie in (0, R_max/2]"
        )));
    }
    Ok(())
}

/// Energy of ζ(t) through the exact change of variables.
fn path_energy(p: &ProblemSpec, a: &Assembled, w: &[f64], gamma: f64, j: i32, t: f64) -> f64 {
    let n = p.dim as f64;
    let c = gamma.powf((n - 2.0) * j as f64 / 2.0);
    let v = |r: f64| p.v.eval(r);
    let b = |r: f64| p.b.eval(r);
    scaled_dilated_energy(a, &v, &b, &p.f, w, t / gamma.powi(j), c)
}

pub fn build_bubble_path(p: &ProblemSpec, eps: f64, rho: f64, j_k: i32) -> Result<BubblePath> {
    build_bubble_path_on(p, eps, rho, j_k, &default_t_grid())
}

pub fn build_bubble_path_on(p: &ProblemSpec, eps: f64, rho: f64, j_k: i32, ts: &[f64]) -> Result<BubblePath> {
    check_bubble_args(&p.grid, eps, rho)?;
    if ts.is_empty() {
        return Err(Error::EmptyInput("t grid"));
    }
    let w = normalized_bubble(&p.grid, eps, rho)?;
    let a = Assembled::new(p, Functional::I);
    let gamma = p.gamma();
    let f = |t: f64| path_energy(p, &a, w.values(), gamma, j_k, t);
    let (values, t_star, max) = tabulate_max(&f, ts);
    let admissible = values.last().is_some_and(|v| *v < 0.0);
    Ok(BubblePath {
        admissible,
        eps,
        rho,
        j_k,
        gamma,
        t: ts.to_vec(),
        values,
        t_star,
        max,
        w,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaxEntry {
    #[serde(with = "crate::serde_num")]
    pub eps: f64,
    #[serde(with = "crate::serde_num")]
    pub t_star: f64,
    #[serde(with = "crate::serde_num")]
    pub max: f64,
    pub admissible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaxReport {
    /// ((μ*−2)/(2μ*))·𝕊_Ḡb^{N/2}.
    #[serde(with = "crate::serde_num")]
    pub bound: f64,
    pub entries: Vec<MinimaxEntry>,
    #[serde(with = "crate::serde_num")]
    pub best: f64,
    /// bound − best over admissible paths; positive when the strict inequality holds.
    #[serde(with = "crate::serde_num")]
    pub gap: f64,
    pub verdict: bool,
}

pub fn minimax_bound(constants: &ConstantsReport, dim: usize) -> f64 {
    let mu = constants.mu_star;
    (mu - 2.0) / (2.0 * mu) * constants.s_gbar_b.powf(dim as f64 / 2.0)
}

pub fn verify_minimax_bound(p: &ProblemSpec, constants: &ConstantsReport, eps_grid: &[f64], j_k: i32) -> Result<MinimaxReport> {
    if eps_grid.is_empty() {
        return Err(Error::EmptyInput("eps grid"));
    }
    let rho = DEFAULT_RHO.min(p.grid.r_max() / 2.0);
    let entries = eps_grid
        .par_iter()
        .map(|&eps| {
            build_bubble_path(p, eps, rho, j_k).map(|b| MinimaxEntry {
                eps,
                t_star: b.t_star,
                max: b.max,
                admissible: b.admissible,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let bound = minimax_bound(constants, p.dim);
    // paths that never turn negative are not in the minimax class
    let best = entries
        .iter()
        .filter(|e| e.admissible)
        .map(|e| e.max)
        .fold(f64::INFINITY, f64::min);
    Ok(MinimaxReport {
        bound,
        entries,
        best,
        gap: bound - best,
        verdict: best < bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub quantity: String,
    #[serde(with = "crate::serde_num::opt")]
    pub q: Option<f64>,
    /// The fit divides by |ln ε| first.
    pub log_case: bool,
    #[serde(with = "crate::serde_num")]
    pub expected: f64,
    #[serde(with = "crate::serde_num")]
    pub slope: f64,
    #[serde(with = "crate::serde_num")]
    pub rel_err: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OzaoReport {
    pub dim: usize,
    #[serde(with = "crate::serde_num::vec")]
    pub eps: Vec<f64>,
    pub fits: Vec<SlopeFit>,
}

impl OzaoReport {
    pub fn fit(&self, quantity: &str) -> Option<&SlopeFit> {
        self.fits.iter().find(|f| f.quantity == quantity)
    }
}

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Exponent s of a fit Q ≈ ε^s (a|ln ε| + b): golden section in s, with (a, b)
/// from relative least squares at each s.
fn log_case_slope(eps: &[f64], q: &[f64]) -> f64 {
    let misfit = |s: f64| {
        // minimize Σ (1 − ε^s(a L + b)/Q)² over (a, b)
        let rows: Vec<(f64, f64)> = eps
            .iter()
            .zip(q)
            .map(|(e, v)| (e.powf(s) * e.ln().abs() / v, e.powf(s) / v))
            .collect();
        let (mut s11, mut s12, mut s22, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(l, c) in &rows {
            s11 += l * l;
            s12 += l * c;
            s22 += c * c;
            t1 += l;
            t2 += c;
        }
        let det = s11 * s22 - s12 * s12;
        let a = (t1 * s22 - t2 * s12) / det;
        let b = (s11 * t2 - s12 * t1) / det;
        rows.iter().map(|(l, c)| (1.0 - a * l - b * c).powi(2)).sum::<f64>()
    };
    let grid: Vec<f64> = (0..=300).map(|k| 0.01 * k as f64).collect();
    let k = (0..grid.len()).fold(0, |b, i| if misfit(grid[i]) < misfit(grid[b]) { i } else { b });
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (grid[k.saturating_sub(1)], grid[(k + 1).min(300)]);
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (misfit(c), misfit(d));
    for _ in 0..80 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = misfit(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = misfit(d);
        }
    }
    0.5 * (lo + hi)
}

/// Exponent of ‖w_ε‖_q^q and whether a |ln ε| factor appears.
pub fn lq_exponent(dim: usize, q: f64) -> (f64, bool) {
    let n = dim as f64;
    let half = critical_exponent(dim) / 2.0;
    if (q - half).abs() < 1e-12 {
        (n / 4.0, true)
    } else if q > half {
        ((n / 2.0) * (1.0 - q / critical_exponent(dim)), false)
    } else {
        ((n - 2.0) * q / 4.0, false)
    }
}

/// Exponent of ‖w_ε‖₂² and whether a |ln ε| factor appears.
pub fn l2_exponent(dim: usize) -> (f64, bool) {
    match dim {
        3 => (0.5, false),
        4 => (1.0, true),
        _ => (1.0, false),
    }
}

/// Log-log slopes of the bubble estimates against ε.
pub fn regress_ozao_asymptotics(eps_grid: &[f64], rho: f64, grid: &RadialGrid) -> Result<OzaoReport> {
    if eps_grid.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "eps grid needs at least 4 points, got {}",
            eps_grid.len()
        )));
    }
    for &e in eps_grid {
        check_bubble_args(grid, e, rho)?;
    }
    let dim = grid.dim();
    let s = sobolev_constant_exact(dim);
    let half = critical_exponent(dim) / 2.0;
    let qs = [half - 0.5, half, half + 1.0];
    let ws = eps_grid
        .par_iter()
        .map(|&e| normalized_bubble(grid, e, rho))
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = eps_grid.iter().map(|e| e.ln()).collect();
    let fit = |name: &str, q: Option<f64>, vals: Vec<f64>, (expected, log_case): (f64, bool)| {
        let slope = if log_case {
            log_case_slope(eps_grid, &vals)
        } else {
            ls_slope(&x, &vals.iter().map(|v| v.ln()).collect::<Vec<_>>())
        };
        let rel_err = ((slope - expected) / expected).abs();
        SlopeFit {
            quantity: name.to_string(),
            q,
            log_case,
            expected,
            slope,
            rel_err,
            ok: rel_err < 0.1,
        }
    };
    let mut fits = vec![
        fit(
            "grad_excess",
            None,
            ws.iter().map(|w| crate::radial::grad_seminorm_sq(w) - s).collect(),
            ((dim as f64 - 2.0) / 2.0, false),
        ),
        fit("l2", None, ws.iter().map(|w| norm_lp(w, 2.0).powi(2)).collect(), l2_exponent(dim)),
    ];
    for q in qs {
        fits.push(fit(
            "lq",
            Some(q),
            ws.iter().map(|w| norm_lp(w, q).powf(q)).collect(),
            lq_exponent(dim, q),
        ));
    }
    Ok(OzaoReport {
        dim,
        eps: eps_grid.to_vec(),
        fits,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPoint {
    #[serde(with = "crate::serde_num")]
    pub energy: f64,
    #[serde(with = "crate::serde_num")]
    pub norm_v: f64,
    #[serde(with = "crate::serde_num")]
    pub relative_residual: f64,
    /// Number of seeds that landed here.
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundStateReport {
    /// Lowest energy among residual-certified critical points.
    #[serde(with = "crate::serde_num")]
    pub estimate: f64,
    /// Smallest ‖u‖_V among the critical points found.
    #[serde(with = "crate::serde_num")]
    pub min_norm_v: f64,
    pub starts: usize,
    pub failures: usize,
    /// Distinct critical points, sorted by energy.
    pub points: Vec<CriticalPoint>,
    #[serde(skip)]
    pub best: Option<SolveReport>,
}

/// Seed k of a scan: k = 0 is the default bump; later seeds perturb width and shape.
pub fn scan_seed(grid: &RadialGrid, rng_seed: u64, k: usize) -> Result<RadialFn> {
    if k == 0 {
        return default_seed(grid);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed.wrapping_add(k as u64));
    let width = 10f64.powf(rng.gen_range(-0.3..0.3));
    let amp = rng.gen_range(-0.3..0.3);
    let freq = rng.gen_range(0.5..3.0);
    grid.sample(|r| (-(r / width).powi(2)).exp() * (1.0 + amp * (freq * r).cos()))
}

pub fn ground_state_scan(p: &ProblemSpec, n_starts: usize, cfg: &SolverConfig) -> Result<GroundStateReport> {
    if n_starts == 0 {
        return Err(Error::EmptyInput("n_starts"));
    }
    let seeds = (0..n_starts)
        .map(|k| scan_seed(&p.grid, cfg.rng_seed, k))
        .collect::<Result<Vec<_>>>()?;
    let runs: Vec<Result<SolveReport>> = seeds
        .into_par_iter()
        .map(|s| {
            let mut c = cfg.clone();
            c.seed = Some(s);
            solve_mountain_pass(p, &c)
        })
        .collect();
    let failures = runs.iter().filter(|r| r.is_err()).count();
    let mut ok: Vec<SolveReport> = runs
        .into_iter()
        .filter_map(|r| r.ok())
        .filter(|r| r.relative_residual < cfg.tol)
        .collect();
    if ok.is_empty() {
        return Err(Error::Stagnated(format!("none of {n_starts} starts converged")));
    }
    ok.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    let a = Assembled::new(p, Functional::I);
    let mut kept: Vec<(SolveReport, usize)> = Vec::new();
    for r in ok {
        let dup = kept.iter_mut().find(|(k, _)| {
            let d: Vec<f64> = k.solution.values().iter().zip(r.solution.values()).map(|(x, y)| x - y).collect();
            a.norm_sq(&d).sqrt() < 1e-3
        });
        match dup {
            Some((_, hits)) => *hits += 1,
            None => kept.push((r, 1)),
        }
    }
    let points: Vec<CriticalPoint> = kept
        .iter()
        .map(|(r, hits)| CriticalPoint {
            energy: r.energy,
            norm_v: r.norm_v,
            relative_residual: r.relative_residual,
            hits: *hits,
        })
        .collect();
    Ok(GroundStateReport {
        estimate: points[0].energy,
        min_norm_v: points.iter().map(|c| c.norm_v).fold(f64::INFINITY, f64::min),
        starts: n_starts,
        failures,
        points,
        best: kept.into_iter().next().map(|k| k.0),
    })
}

/// Log-spaced ε values 2^{−lo} … 2^{−hi}.
pub fn dyadic_eps(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(-k)).collect()
}

/// ε grid used when the caller has none: 10 values on [1e−4, 1e−1].
pub fn default_eps_grid() -> Vec<f64> {
    logspace(1e-4, 1e-1, 10)
}
