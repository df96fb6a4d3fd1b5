//! The functionals I, I_P and J_ν on radial grids, their exact discrete
//! gradients, and the Nehari, Pohozaev and Tang diagnostics.

use crate::error::{Error, Result};
use crate::linalg::solve_tridiagonal;
use crate::nonlinearity::NonlinearitySpec;
use crate::potential::{CoefficientSpec, PotentialSpec};
use crate::radial::{critical_exponent, RadialFn, RadialGrid};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Tolerance for |b − b_P| over the outermost decade of nodes.
pub const B_LIMIT_TOL: f64 = 1e-6;

/// Data of `−Δu + V(x)u = f(u) + b(x)g(u)` together with its limit problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub dim: usize,
    pub v: PotentialSpec,
    pub v_p: PotentialSpec,
    pub f: NonlinearitySpec,
    pub f_p: NonlinearitySpec,
    pub g: NonlinearitySpec,
    pub b: CoefficientSpec,
    pub b_p: CoefficientSpec,
    pub grid: RadialGrid,
}

impl ProblemSpec {
    /// `−Δu + u = λ|u|^{p−2}u + |u|^{2*−2}u` on the given grid.
    pub fn model(grid: RadialGrid, lambda: f64, p: f64) -> Self {
        let f = NonlinearitySpec::power(lambda, p);
        Self {
            dim: grid.dim(),
            v: PotentialSpec::Constant { value: 1.0 },
            v_p: PotentialSpec::Constant { value: 1.0 },
            f: f.clone(),
            f_p: f,
            g: NonlinearitySpec::critical_power(grid.dim()),
            b: CoefficientSpec::constant(1.0),
            b_p: CoefficientSpec::constant(1.0),
            grid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.dim() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "grid dimension {} differs from problem dimension {}",
                self.grid.dim(),
                self.dim
            )));
        }
        self.v.validate()?;
        self.v_p.validate()?;
        self.f.validate()?;
        self.f_p.validate()?;
        self.g.validate()?;
        self.b.validate()?;
        self.b_p.validate()?;
        let m = self.grid.nodes();
        for i in (m - m / 10)..=m {
            let r = self.grid.r(i);
            let gap = (self.b.eval(r) - self.b_p.eval(r)).abs();
            if gap > B_LIMIT_TOL {
                return Err(Error::InvalidParameter(format!(
                    "|b - b_P| = {gap:.3e} at r = {r} exceeds {B_LIMIT_TOL:e} on the outer decade"
                )));
            }
        }
        Ok(())
    }

    /// The limit problem: V_P, f_P, b_P in place of V, f, b.
    pub fn periodic(&self) -> Self {
        let mut p = self.clone();
        p.v = limit_potential(&self.v_p, &self.grid);
        p.f = self.f_p.clone();
        p.b = self.b_p.clone();
        p
    }

    pub fn with_grid(&self, grid: RadialGrid) -> Self {
        let mut p = self.clone();
        p.grid = grid;
        p
    }

    /// inf b over the grid nodes.
    pub fn b0(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| self.b.eval(self.grid.r(i)))
            .fold(f64::INFINITY, f64::min)
    }

    /// sup b over the grid nodes.
    pub fn b_sup(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| self.b.eval(self.grid.r(i)))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Self-similarity ratio used for dilation bookkeeping.
    pub fn gamma(&self) -> f64 {
        self.g.gamma().unwrap_or(2.0)
    }
}

fn limit_potential(v_p: &PotentialSpec, grid: &RadialGrid) -> PotentialSpec {
    match v_p {
        PotentialSpec::Constant { .. } => v_p.clone(),
        _ => PotentialSpec::TabulatedRadial {
            radii: (0..grid.len()).map(|i| grid.r(i)).collect(),
            values: (0..grid.len()).map(|i| v_p.eval_periodic(grid.r(i))).collect(),
        },
    }
}

/// Which functional to assemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Functional {
    I,
    IP,
    /// J_ν with the given constant in front of G.
    J(f64),
}

/// Node-wise data of an assembled functional.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub grid: RadialGrid,
    pub mass: Vec<f64>,
    pub edge: Vec<f64>,
    pub pot: Vec<f64>,
    pub coef: Vec<f64>,
    pub f: NonlinearitySpec,
    pub g: NonlinearitySpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Parts {
    pub kinetic: f64,
    pub potential: f64,
    pub f_part: f64,
    pub g_part: f64,
}

impl Parts {
    pub fn value(&self) -> f64 {
        0.5 * self.kinetic + 0.5 * self.potential - self.f_part - self.g_part
    }
}

impl Assembled {
    pub fn new(p: &ProblemSpec, which: Functional) -> Self {
        let grid = p.grid;
        let n = grid.len();
        let r = |i: usize| grid.r(i);
        let (pot, coef, f) = match which {
            Functional::I => (
                (0..n).map(|i| p.v.eval(r(i))).collect(),
                (0..n).map(|i| p.b.eval(r(i))).collect(),
                p.f.clone(),
            ),
            Functional::IP => (
                (0..n).map(|i| p.v_p.eval_periodic(r(i))).collect(),
                (0..n).map(|i| p.b_p.eval(r(i))).collect(),
                p.f_p.clone(),
            ),
            Functional::J(c) => (vec![0.0; n], vec![c; n], NonlinearitySpec::zero()),
        };
        Self {
            grid,
            mass: grid.masses(),
            edge: grid.edges(),
            pot,
            coef,
            f,
            g: p.g.clone(),
        }
    }

    pub fn kinetic(&self, u: &[f64]) -> f64 {
        u.windows(2)
            .zip(&self.edge)
            .map(|(w, e)| e * (w[1] - w[0]).powi(2))
            .sum()
    }

    pub fn parts(&self, u: &[f64]) -> Parts {
        let mut potential = 0.0;
        let mut f_part = 0.0;
        let mut g_part = 0.0;
        let f_zero = self.f.is_zero();
        for i in 0..u.len() {
            let m = self.mass[i];
            if m == 0.0 {
                continue;
            }
            let x = u[i];
            potential += m * self.pot[i] * x * x;
            if !f_zero {
                f_part += m * self.f.primitive(x);
            }
            g_part += m * self.coef[i] * self.g.primitive(x);
        }
        Parts {
            kinetic: self.kinetic(u),
            potential,
            f_part,
            g_part,
        }
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        self.parts(u).value()
    }

    /// ∂I/∂u_i, the exact gradient of the discrete functional (dual vector).
    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let m = self.grid.nodes();
        let mut out = vec![0.0; m + 1];
        let f_zero = self.f.is_zero();
        for i in 0..m {
            let mut v = 0.0;
            if i > 0 {
                v += self.edge[i - 1] * (u[i] - u[i - 1]);
            }
            v += self.edge[i] * (u[i] - u[i + 1]);
            let x = u[i];
            let mut loc = self.pot[i] * x - self.coef[i] * self.g.value(x);
            if !f_zero {
                loc -= self.f.value(x);
            }
            out[i] = v + self.mass[i] * loc;
        }
        out
    }

    /// Tridiagonal `(sub, diag, sup)` of A_V on the free nodes 0..M-1.
    pub fn operator(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let m = self.grid.nodes();
        let diag: Vec<f64> = (0..m)
            .map(|i| {
                let left = if i > 0 { self.edge[i - 1] } else { 0.0 };
                left + self.edge[i] + self.mass[i] * self.pot[i]
            })
            .collect();
        let off: Vec<f64> = (0..m - 1).map(|i| -self.edge[i]).collect();
        (off.clone(), diag, off)
    }

    /// Solves A_V z = r (Dirichlet at R_max).
    pub fn riesz(&self, r: &[f64]) -> Result<Vec<f64>> {
        let m = self.grid.nodes();
        let (sub, diag, sup) = self.operator();
        let mut z = solve_tridiagonal(&sub, &diag, &sup, &r[..m])?;
        z.push(0.0);
        Ok(z)
    }

    /// Jacobian of the gradient (tridiagonal) on the free nodes.
    pub fn jacobian(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (sub, mut diag, sup) = self.operator();
        let f_zero = self.f.is_zero();
        for (i, d) in diag.iter_mut().enumerate() {
            if self.mass[i] == 0.0 {
                continue;
            }
            let x = u[i];
            let mut nl = self.coef[i] * self.g.derivative(x);
            if !f_zero {
                nl += self.f.derivative(x);
            }
            *d -= self.mass[i] * nl;
        }
        (sub, diag, sup)
    }

    /// ‖u‖² in the operator norm (‖u‖_V² for I, ‖∇u‖² for J).
    pub fn norm_sq(&self, u: &[f64]) -> f64 {
        let pot: f64 = (0..u.len()).map(|i| self.mass[i] * self.pot[i] * u[i] * u[i]).sum();
        self.kinetic(u) + pot
    }

    /// Dual norm of the gradient and its Riesz representative.
    pub fn residual(&self, u: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let r = self.gradient(u);
        let z = self.riesz(&r)?;
        let n2: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        Ok((n2.max(0.0).sqrt(), z, r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub value: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub f_part: f64,
    pub g_part: f64,
    pub residual_norm: f64,
    pub nehari: f64,
    pub pohozaev: Option<f64>,
}

fn check_grid(p: &ProblemSpec, u: &RadialFn) -> Result<()> {
    if *u.grid() != p.grid {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

fn report(p: &ProblemSpec, a: &Assembled, u: &RadialFn, mode: Option<PohozaevMode>) -> Result<EnergyReport> {
    check_grid(p, u)?;
    let parts = a.parts(u.values());
    let (norm, _, r) = a.residual(u.values())?;
    let nehari: f64 = r.iter().zip(u.values()).map(|(a, b)| a * b).sum();
    let pohozaev = match mode {
        Some(m) => pohozaev_residual(p, u, m).ok(),
        None => None,
    };
    Ok(EnergyReport {
        value: parts.value(),
        kinetic: parts.kinetic,
        potential: parts.potential,
        f_part: parts.f_part,
        g_part: parts.g_part,
        residual_norm: norm,
        nehari,
        pohozaev,
    })
}

fn autonomous(p: &ProblemSpec) -> bool {
    p.v_p.is_constant() && p.b_p.constant_value().is_some()
}

pub fn eval_i(p: &ProblemSpec, u: &RadialFn) -> Result<EnergyReport> {
    let a = Assembled::new(p, Functional::I);
    let mode = (autonomous(p) && p.v == p.v_p && p.b == p.b_p && p.f == p.f_p)
        .then_some(PohozaevMode::AutonomousFull);
    report(p, &a, u, mode)
}

pub fn eval_ip(p: &ProblemSpec, u: &RadialFn) -> Result<EnergyReport> {
    let a = Assembled::new(p, Functional::IP);
    let mode = autonomous(p).then_some(PohozaevMode::AutonomousFull);
    report(p, &a, u, mode)
}

/// J_ν(u) = ½‖∇u‖² − c∫G(u), with the constant c supplied by the caller.
pub fn eval_jnu(p: &ProblemSpec, u: &RadialFn, c: f64) -> Result<EnergyReport> {
    let a = Assembled::new(p, Functional::J(c));
    report(p, &a, u, Some(PohozaevMode::AutonomousJ(c)))
}

/// Riesz representative of I′(u) in the H¹_V inner product.
pub fn weak_residual(p: &ProblemSpec, u: &RadialFn) -> Result<RadialFn> {
    check_grid(p, u)?;
    let a = Assembled::new(p, Functional::I);
    let (_, z, _) = a.residual(u.values())?;
    RadialFn::new(p.grid, z)
}

/// Strong form `−Δu + Vu − f(u) − b g(u)` at the nodes (diagnostic).
pub fn strong_residual(p: &ProblemSpec, u: &RadialFn) -> Result<RadialFn> {
    check_grid(p, u)?;
    let a = Assembled::new(p, Functional::I);
    let r = a.gradient(u.values());
    let g = p.grid;
    let h = g.step();
    let x = u.values();
    let mut out: Vec<f64> = (0..g.len())
        .map(|i| if a.mass[i] > 0.0 { r[i] / a.mass[i] } else { 0.0 })
        .collect();
    let nl = p.f.value(x[0]) + a.coef[0] * p.g.value(x[0]);
    out[0] = -2.0 * p.dim as f64 * (x[1] - x[0]) / (h * h) + a.pot[0] * x[0] - nl;
    out[g.nodes()] = 0.0;
    RadialFn::new(g, out)
}

/// Dual H¹_V norm of I′(u).
pub fn residual_norm(p: &ProblemSpec, u: &RadialFn) -> Result<f64> {
    check_grid(p, u)?;
    Assembled::new(p, Functional::I).residual(u.values()).map(|t| t.0)
}

/// ⟨I′(u), φ⟩.
pub fn residual_pairing(p: &ProblemSpec, u: &RadialFn, phi: &RadialFn) -> Result<f64> {
    check_grid(p, u)?;
    check_grid(p, phi)?;
    let r = Assembled::new(p, Functional::I).gradient(u.values());
    Ok(r.iter().zip(phi.values()).map(|(a, b)| a * b).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PohozaevMode {
    /// ∫ c·G(u) = (N−2)/(2N)‖∇u‖².
    AutonomousJ(f64),
    /// ∫ F_P(u) + b_P G(u) − (V_P/2)u² = (N−2)/(2N)‖∇u‖².
    AutonomousFull,
}

/// (LHS − RHS)/‖∇u‖² of the Pohozaev identity.
pub fn pohozaev_residual(p: &ProblemSpec, u: &RadialFn, mode: PohozaevMode) -> Result<f64> {
    check_grid(p, u)?;
    let n = p.dim as f64;
    let a = match mode {
        PohozaevMode::AutonomousJ(c) => Assembled::new(p, Functional::J(c)),
        PohozaevMode::AutonomousFull => {
            if !autonomous(p) {
                return Err(Error::PohozaevMode);
            }
            Assembled::new(p, Functional::IP)
        }
    };
    let parts = a.parts(u.values());
    if parts.kinetic == 0.0 {
        return Ok(0.0);
    }
    let lhs = parts.f_part + parts.g_part - 0.5 * parts.potential;
    let rhs = (n - 2.0) / (2.0 * n) * parts.kinetic;
    Ok((lhs - rhs) / parts.kinetic)
}

/// min over t of I(u) − I(tu) − ((1−t²)/2) I′(u)·u.
pub fn tang_theta_inequality(p: &ProblemSpec, u: &RadialFn, thetas: &[f64]) -> Result<f64> {
    check_grid(p, u)?;
    let a = Assembled::new(p, Functional::I);
    let x = u.values();
    let iu = a.energy(x);
    let r = a.gradient(x);
    let nehari: f64 = r.iter().zip(x).map(|(a, b)| a * b).sum();
    let mut worst = f64::INFINITY;
    for &t in thetas {
        let tu: Vec<f64> = x.iter().map(|v| t * v).collect();
        let m = iu - a.energy(&tu) - 0.5 * (1.0 - t * t) * nehari;
        worst = worst.min(m);
    }
    Ok(if thetas.is_empty() { 0.0 } else { worst })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMode {
    /// t ↦ t·u_P.
    ScalingTu,
    /// t ↦ u_P(·/t).
    DilationUOfXOverT,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub mode: PathMode,
    pub t: Vec<f64>,
    pub i_values: Vec<f64>,
    pub ip_values: Vec<f64>,
    pub argmax_i: f64,
    pub max_i: f64,
    pub argmax_ip: f64,
    pub max_ip: f64,
    /// Dilation paths whose support exceeds R_max at some sampled t.
    pub truncated: bool,
    /// Some(true) when the strict inequality max I < max I_P is witnessed.
    pub strict_witness: Option<bool>,
}

/// Energy of `u(·/t)` evaluated exactly through the change of variables
/// x = t y, so the path never needs resampling.
pub(crate) fn dilated_energy(a: &Assembled, v_eval: &dyn Fn(f64) -> f64, b_eval: &dyn Fn(f64) -> f64, f: &NonlinearitySpec, u: &[f64], t: f64) -> f64 {
    scaled_dilated_energy(a, v_eval, b_eval, f, u, t, 1.0)
}

/// Energy of `c·u(·/t)`.
pub(crate) fn scaled_dilated_energy(
    a: &Assembled,
    v_eval: &dyn Fn(f64) -> f64,
    b_eval: &dyn Fn(f64) -> f64,
    f: &NonlinearitySpec,
    u: &[f64],
    t: f64,
    c: f64,
) -> f64 {
    let g = a.grid;
    let n = g.dim() as f64;
    let kin = a.kinetic(u);
    let mut rest = 0.0;
    for i in 0..u.len() {
        let m = a.mass[i];
        if m == 0.0 {
            continue;
        }
        let r = t * g.r(i);
        let x = c * u[i];
        rest += m * (0.5 * v_eval(r) * x * x - f.primitive(x) - b_eval(r) * a.g.primitive(x));
    }
    0.5 * c * c * t.powf(n - 2.0) * kin + t.powf(n) * rest
}

pub(crate) fn golden_max(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    // golden section in ln t
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c.exp()), f(d.exp()));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d.exp());
        }
        if (b - a).abs() < 1e-12 {
            break;
        }
    }
    let t = (0.5 * (a + b)).exp();
    (t, f(t))
}

/// Tabulates t ↦ f(t) on a log grid, then refines the maximum by golden section.
pub(crate) fn tabulate_max(f: &(dyn Fn(f64) -> f64 + Sync), ts: &[f64]) -> (Vec<f64>, f64, f64) {
    let vals: Vec<f64> = ts.par_iter().map(|&t| f(t)).collect();
    let k = vals
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > vals[best] { i } else { best });
    let lo = ts[k.saturating_sub(1)];
    let hi = ts[(k + 1).min(ts.len() - 1)];
    let (t, v) = golden_max(f, lo, hi);
    if v >= vals[k] {
        (vals, t, v)
    } else {
        let best = vals[k];
        (vals, ts[k], best)
    }
}

/// Default path grid: 400 log-spaced points on [1e−3, 1e3].
pub fn default_t_grid() -> Vec<f64> {
    crate::radial::logspace(1e-3, 1e3, 400)
}

/// Tabulates I and I_P along a comparison path through u_P.
pub fn comparison_path_report(p: &ProblemSpec, u_p: &RadialFn, mode: PathMode) -> Result<PathReport> {
    comparison_path_report_on(p, u_p, mode, &default_t_grid())
}

pub fn comparison_path_report_on(p: &ProblemSpec, u_p: &RadialFn, mode: PathMode, ts: &[f64]) -> Result<PathReport> {
    check_grid(p, u_p)?;
    if ts.is_empty() {
        return Err(Error::EmptyInput("t grid"));
    }
    let ai = Assembled::new(p, Functional::I);
    let aip = Assembled::new(p, Functional::IP);
    let x = u_p.values();
    let (i_vals, ti, mi, ip_vals, tip, mip, truncated) = match mode {
        PathMode::ScalingTu => {
            let fi = |t: f64| ai.energy(&x.iter().map(|v| t * v).collect::<Vec<_>>());
            let fip = |t: f64| aip.energy(&x.iter().map(|v| t * v).collect::<Vec<_>>());
            let (iv, ti, mi) = tabulate_max(&fi, ts);
            let (ipv, tip, mip) = tabulate_max(&fip, ts);
            (iv, ti, mi, ipv, tip, mip, false)
        }
        PathMode::DilationUOfXOverT => {
            let vi = |r: f64| p.v.eval(r);
            let bi = |r: f64| p.b.eval(r);
            let vp = |r: f64| p.v_p.eval_periodic(r);
            let bp = |r: f64| p.b_p.eval(r);
            let fi = |t: f64| dilated_energy(&ai, &vi, &bi, &p.f, x, t);
            let fip = |t: f64| dilated_energy(&aip, &vp, &bp, &p.f_p, x, t);
            let (iv, ti, mi) = tabulate_max(&fi, ts);
            let (ipv, tip, mip) = tabulate_max(&fip, ts);
            let support = support_radius(u_p);
            let tmax = ts.iter().cloned().fold(0.0, f64::max);
            (iv, ti, mi, ipv, tip, mip, support * tmax > p.grid.r_max())
        }
    };
    Ok(PathReport {
        mode,
        t: ts.to_vec(),
        i_values: i_vals,
        ip_values: ip_vals,
        argmax_i: ti,
        max_i: mi,
        argmax_ip: tip,
        max_ip: mip,
        truncated,
        strict_witness: Some(mi < mip),
    })
}

/// Radius beyond which |u| < 1e−12·max|u|.
pub fn support_radius(u: &RadialFn) -> f64 {
    let m = u.max_abs();
    let g = u.grid();
    let cut = 1e-12 * m;
    let last = u.values().iter().rposition(|v| v.abs() > cut).unwrap_or(0);
    g.r(last)
}

/// 2N/(N−2) for the problem dimension.
pub fn two_star(p: &ProblemSpec) -> f64 {
    critical_exponent(p.dim)
}
