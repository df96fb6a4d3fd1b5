//! Radial discretization of ℝᴺ: a uniform grid on [0, R_max] with Dirichlet
//! truncation, trapezoid quadrature against σ_N r^{N-1}, and the norms built on it.

use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Uniform radial grid `r_i = i h`, `i = 0..=M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    dim: usize,
    nodes: usize,
    step: f64,
    sigma: f64,
}

/// Area of the unit sphere in ℝᴺ.
pub fn surface_measure(dim: usize) -> f64 {
    let n = dim as f64;
    2.0 * PI.powf(n / 2.0) / statrs::function::gamma::gamma(n / 2.0)
}

/// 2N/(N-2).
pub fn critical_exponent(dim: usize) -> f64 {
    let n = dim as f64;
    2.0 * n / (n - 2.0)
}

impl RadialGrid {
    pub fn new(dim: usize, nodes: usize, r_max: f64) -> Result<Self> {
        if dim < 3 {
            return Err(Error::InvalidGrid(format!("dimension {dim} < 3")));
        }
        if nodes < 8 {
            return Err(Error::InvalidGrid(format!("node count {nodes} < 8")));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::InvalidGrid(format!("bad truncation radius {r_max}")));
        }
        Ok(Self {
            dim,
            nodes,
            step: r_max / nodes as f64,
            sigma: surface_measure(dim),
        })
    }

    /// N = 3, M = 4096, R_max = 40.
    pub fn standard() -> Self {
        Self::new(3, 4096, 40.0).expect("default grid is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// M; the grid has M+1 nodes.
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn r_max(&self) -> f64 {
        self.step * self.nodes as f64
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn two_star(&self) -> f64 {
        critical_exponent(self.dim)
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    /// Trapezoid mass `σ_N w_i r_i^{N-1}` of node i.
    #[inline]
    pub fn mass(&self, i: usize) -> f64 {
        let w = if i == 0 || i == self.nodes { 0.5 } else { 1.0 } * self.step;
        self.sigma * w * self.r(i).powi(self.dim as i32 - 1)
    }

    /// Weight of the edge (i, i+1) in the gradient form, `σ_N r_{i+1/2}^{N-1} / h`.
    #[inline]
    pub fn edge(&self, i: usize) -> f64 {
        let rm = (i as f64 + 0.5) * self.step;
        self.sigma * rm.powi(self.dim as i32 - 1) / self.step
    }

    pub fn masses(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.mass(i)).collect()
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.edge(i)).collect()
    }

    pub fn with_nodes(&self, nodes: usize) -> Result<Self> {
        Self::new(self.dim, nodes, self.r_max())
    }

    pub fn with_r_max(&self, r_max: f64) -> Result<Self> {
        Self::new(self.dim, self.nodes, r_max)
    }

    /// Samples `f` at the nodes and zeroes the last one.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Result<RadialFn> {
        let mut values: Vec<f64> = (0..self.len()).map(|i| f(self.r(i))).collect();
        values[self.nodes] = 0.0;
        RadialFn::new(*self, values)
    }
}

/// A radial function sampled on a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialFn {
    grid: RadialGrid,
    values: Vec<f64>,
}

impl RadialFn {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("radial function"));
        }
        if values[grid.nodes] != 0.0 {
            return Err(Error::InvalidGrid("value at R_max must be 0".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Replaces the values; non-finite entries or a nonzero tail are rejected.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid, values)
    }

    pub(crate) fn from_raw(grid: RadialGrid, mut values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        values[grid.nodes] = 0.0;
        Self { grid, values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &RadialFn) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
        ))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Linear interpolation; 0 beyond R_max.
    pub fn at(&self, r: f64) -> f64 {
        interpolate(&self.grid, &self.values, r)
    }
}

pub(crate) fn interpolate(grid: &RadialGrid, values: &[f64], r: f64) -> f64 {
    let r = r.abs();
    let x = r / grid.step;
    if !(x < grid.nodes as f64) {
        return 0.0;
    }
    let i = x.floor() as usize;
    let t = x - i as f64;
    values[i] * (1.0 - t) + values[i + 1] * t
}

/// `σ_N Σ w_i d(r_i) r_i^{N-1}`.
pub fn integrate(density: &RadialFn) -> Result<f64> {
    integrate_values(&density.grid, &density.values)
}

pub fn integrate_values(grid: &RadialGrid, density: &[f64]) -> Result<f64> {
    if density.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    let mut acc = 0.0;
    for (i, &d) in density.iter().enumerate() {
        if !d.is_finite() {
            return Err(Error::NonFiniteDensity);
        }
        acc += grid.mass(i) * d;
    }
    Ok(acc)
}

/// ‖∇u‖₂² from central differences at the cell midpoints r_{i+1/2}.
pub fn grad_seminorm_sq(u: &RadialFn) -> f64 {
    let g = &u.grid;
    u.values
        .windows(2)
        .enumerate()
        .map(|(i, w)| g.edge(i) * (w[1] - w[0]).powi(2))
        .sum()
}

pub fn norm_lp(u: &RadialFn, p: f64) -> f64 {
    let s: f64 = u
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| u.grid.mass(i) * v.abs().powf(p))
        .sum();
    s.powf(1.0 / p)
}

/// ‖u‖_V² = ‖∇u‖₂² + ∫V u².
pub fn norm_hv_sq(u: &RadialFn, v: &PotentialSpec) -> Result<f64> {
    let g = &u.grid;
    let mut pot = 0.0;
    for (i, &x) in u.values.iter().enumerate() {
        let vi = v.eval(g.r(i));
        if !vi.is_finite() {
            return Err(Error::NonFinite("potential"));
        }
        pot += g.mass(i) * vi * x * x;
    }
    Ok(grad_seminorm_sq(u) + pot)
}

/// `x ↦ γ^{(N-2)j/2} u(γ^j x)`, linearly resampled.
pub fn apply_dilation(u: &RadialFn, gamma: f64, j: i32) -> RadialFn {
    dilate(u, gamma.powi(j))
}

/// `x ↦ λ^{(N-2)/2} u(λ x)` for a real factor λ > 0.
pub fn dilate(u: &RadialFn, lambda: f64) -> RadialFn {
    if lambda == 1.0 {
        return u.clone();
    }
    let g = u.grid;
    let amp = lambda.powf((g.dim as f64 - 2.0) / 2.0);
    let values = (0..g.len())
        .map(|i| amp * interpolate(&g, &u.values, lambda * g.r(i)))
        .collect();
    RadialFn::from_raw(g, values)
}

/// `n` log-spaced points from `a` to `b` inclusive.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => {
            let (la, lb) = (a.ln(), b.ln());
            (0..n)
                .map(|k| (la + (lb - la) * k as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}

/// Talenti instanton `C(N) ε^{(N-2)/4} / (ε + r²)^{(N-2)/2}`.
pub fn talenti(dim: usize, eps: f64, r: f64) -> f64 {
    let n = dim as f64;
    let c = (n * (n - 2.0)).powf((n - 2.0) / 4.0);
    c * eps.powf((n - 2.0) / 4.0) / (eps + r * r).powf((n - 2.0) / 2.0)
}

/// Closed-form Sobolev constant `π N (N-2) (Γ(N/2)/Γ(N))^{2/N}`.
pub fn sobolev_constant_exact(dim: usize) -> f64 {
    use statrs::function::gamma::gamma;
    let n = dim as f64;
    PI * n * (n - 2.0) * (gamma(n / 2.0) / gamma(n)).powf(2.0 / n)
}
