//! Profile decomposition of bounded sequences on a cubic lattice box.
//!
//! Sequences are sampled on a uniform grid over `[-L, L)^N`. The symmetry group acts
//! by `d_{j,y} w = gamma^{(N-2) j / 2} w(gamma^j (x - y))` with `y` a lattice point.

use crate::hypothesis::{splitting_estimate, SplittingEstimate};
use crate::nonlinearity::NonlinearitySpec;
use crate::radial::critical_exponent;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const SUPPORT_FLOOR: f64 = 1e-14;
const MIN_COHERENCE: f64 = 0.5;

/// Samples of a function on the box `[-L, L)^N` with `m` nodes per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFn {
    pub half_width: f64,
    pub nodes: usize,
    pub dim: usize,
    values: Vec<f64>,
}

impl GridFn {
    pub fn new(half_width: f64, nodes: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        check_box(half_width, nodes, dim)?;
        if values.len() != nodes.pow(dim as u32) {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                nodes.pow(dim as u32),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid function"));
        }
        let mut g = Self { half_width, nodes, dim, values };
        g.zero_shell();
        Ok(g)
    }

    pub fn zeros(half_width: f64, nodes: usize, dim: usize) -> Result<Self> {
        check_box(half_width, nodes, dim)?;
        Ok(Self { half_width, nodes, dim, values: vec![0.0; nodes.pow(dim as u32)] })
    }

    /// Samples `f` at every node; the boundary shell is forced to zero.
    pub fn from_fn(
        half_width: f64,
        nodes: usize,
        dim: usize,
        f: impl Fn(&[f64]) -> f64 + Sync,
    ) -> Result<Self> {
        let mut g = Self::zeros(half_width, nodes, dim)?;
        let h = g.step();
        g.values.par_iter_mut().enumerate().for_each(|(idx, v)| {
            let mut x = [0.0; 8];
            let mut rest = idx;
            for a in (0..dim).rev() {
                x[a] = -half_width + (rest % nodes) as f64 * h;
                rest /= nodes;
            }
            *v = f(&x[..dim]);
        });
        if g.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid function"));
        }
        g.zero_shell();
        Ok(g)
    }

    /// Compact bump `amplitude (1 - |x|^2 / radius^2)_+^4` centred at the origin.
    pub fn bump(half_width: f64, nodes: usize, dim: usize, amplitude: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidParameter("bump needs radius > 0 and finite amplitude".into()));
        }
        Self::from_fn(half_width, nodes, dim, |x| {
            let s = 1.0 - x.iter().map(|v| v * v).sum::<f64>() / (radius * radius);
            if s > 0.0 {
                amplitude * s.powi(4)
            } else {
                0.0
            }
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / self.nodes as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.step()
    }

    fn cell(&self) -> f64 {
        self.step().powi(self.dim as i32)
    }

    fn index_to_point(&self, idx: usize, x: &mut [f64]) {
        let mut rest = idx;
        for a in (0..self.dim).rev() {
            x[a] = self.coord(rest % self.nodes);
            rest /= self.nodes;
        }
    }

    fn stride(&self, axis: usize) -> usize {
        self.nodes.pow((self.dim - 1 - axis) as u32)
    }

    fn zero_shell(&mut self) {
        let (m, dim) = (self.nodes, self.dim);
        for idx in 0..self.values.len() {
            let mut rest = idx;
            for _ in 0..dim {
                let i = rest % m;
                if i == 0 || i == m - 1 {
                    self.values[idx] = 0.0;
                    break;
                }
                rest /= m;
            }
        }
    }

    pub fn same_box(&self, other: &Self) -> bool {
        self.half_width == other.half_width && self.nodes == other.nodes && self.dim == other.dim
    }

    pub fn norm_lp(&self, p: f64) -> f64 {
        (self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * self.cell()).powf(1.0 / p)
    }

    /// Forward-difference Dirichlet energy `sum |grad u|^2`.
    pub fn grad_sq(&self) -> f64 {
        let h = self.step();
        let m = self.nodes;
        let mut total = 0.0;
        for a in 0..self.dim {
            let s = self.stride(a);
            for idx in 0..self.values.len() {
                if (idx / s) % m + 1 < m {
                    let d = self.values[idx + s] - self.values[idx];
                    total += d * d;
                }
            }
        }
        total * self.cell() / (h * h)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Largest distance from the origin of a node carrying a non-negligible value.
    pub fn support_radius(&self) -> f64 {
        let floor = SUPPORT_FLOOR * self.max_abs();
        let mut x = vec![0.0; self.dim];
        let mut r: f64 = 0.0;
        for (idx, v) in self.values.iter().enumerate() {
            if v.abs() > floor {
                self.index_to_point(idx, &mut x);
                r = r.max(x.iter().map(|c| c * c).sum::<f64>().sqrt());
            }
        }
        r
    }

    /// `(point, value)` for every nonzero node, in storage order.
    pub fn nonzero_entries(&self) -> Vec<(Vec<f64>, f64)> {
        let mut x = vec![0.0; self.dim];
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(idx, v)| {
                self.index_to_point(idx, &mut x);
                (x.clone(), *v)
            })
            .collect()
    }

    /// Inverse of `nonzero_entries`; points must sit on nodes.
    pub fn from_entries(
        half_width: f64,
        nodes: usize,
        dim: usize,
        entries: &[(Vec<f64>, f64)],
    ) -> Result<Self> {
        let mut g = Self::zeros(half_width, nodes, dim)?;
        let h = g.step();
        for (x, v) in entries {
            if x.len() != dim {
                return Err(Error::InvalidGrid(format!("point with {} coordinates in dimension {dim}", x.len())));
            }
            let mut idx = 0;
            for (a, c) in x.iter().enumerate() {
                let t = (c + half_width) / h;
                let i = t.round();
                if (t - i).abs() > 1e-6 || i < 0.0 || i >= nodes as f64 {
                    return Err(Error::InvalidGrid(format!("point {x:?} is not a node of the box")));
                }
                idx += i as usize * g.stride(a);
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("grid function"));
            }
            g.values[idx] = *v;
        }
        g.zero_shell();
        Ok(g)
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (u, v) in self.values.iter_mut().zip(&other.values) {
            *u += a * v;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// Separable cubic convolution interpolation; zero outside the box.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let h = self.step();
        let m = self.nodes as isize;
        let mut base = [0isize; 8];
        let mut w = [[0.0; 4]; 8];
        for a in 0..self.dim {
            let t = (x[a] + self.half_width) / h;
            if !(t > -2.0 && t < m as f64 + 1.0) {
                return 0.0;
            }
            let i0 = t.floor();
            let f = t - i0;
            base[a] = i0 as isize - 1;
            w[a] = keys_weights(f);
        }
        let mut total = 0.0;
        let combos = 4usize.pow(self.dim as u32);
        'outer: for c in 0..combos {
            let mut rest = c;
            let mut idx = 0usize;
            let mut weight = 1.0;
            for a in 0..self.dim {
                let o = rest % 4;
                rest /= 4;
                let i = base[a] + o as isize;
                if i < 0 || i >= m {
                    continue 'outer;
                }
                weight *= w[a][o];
                idx += i as usize * self.stride(a);
            }
            total += weight * self.values[idx];
        }
        total
    }
}

fn check_box(half_width: f64, nodes: usize, dim: usize) -> Result<()> {
    if !(half_width > 0.0 && half_width.is_finite()) || nodes < 4 || !(1..=8).contains(&dim) {
        return Err(Error::InvalidGrid(format!(
            "box needs L > 0, m >= 4, 1 <= N <= 8 (got L = {half_width}, m = {nodes}, N = {dim})"
        )));
    }
    Ok(())
}

fn keys_weights(f: f64) -> [f64; 4] {
    let a = -0.5;
    let k = |s: f64| {
        let s = s.abs();
        if s <= 1.0 {
            (a + 2.0) * s * s * s - (a + 3.0) * s * s + 1.0
        } else if s < 2.0 {
            a * s * s * s - 5.0 * a * s * s + 8.0 * a * s - 4.0 * a
        } else {
            0.0
        }
    };
    [k(1.0 + f), k(f), k(1.0 - f), k(2.0 - f)]
}

/// Element `(y, j)` of the translation-dilation group with ratio `gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub y: Vec<i64>,
    pub j: i32,
    pub gamma: f64,
}

impl GroupElement {
    pub fn identity(dim: usize, gamma: f64) -> Self {
        Self { y: vec![0; dim], j: 0, gamma }
    }

    pub fn amplitude(&self, dim: usize) -> f64 {
        self.gamma.powf((dim as f64 - 2.0) * self.j as f64 / 2.0)
    }

    fn scale(&self) -> f64 {
        self.gamma.powi(self.j)
    }

    fn y_f64(&self) -> Vec<f64> {
        self.y.iter().map(|&v| v as f64).collect()
    }
}

/// Separation `|j_n - j_m| + |gamma^{j_n} (y_n - y_m)|` between two group elements.
pub fn separation(a: &GroupElement, b: &GroupElement) -> f64 {
    let dy: f64 = a
        .y
        .iter()
        .zip(&b.y)
        .map(|(p, q)| ((p - q) as f64).powi(2))
        .sum::<f64>()
        .sqrt();
    (a.j - b.j).abs() as f64 + a.scale() * dy
}

fn fits_box(w_radius: f64, g: &GroupElement, target: &GridFn) -> bool {
    let reach = w_radius / g.scale();
    let inner = target.half_width - target.step();
    g.y.iter().all(|&c| (c as f64 - reach) > -target.half_width + target.step() && (c as f64 + reach) < inner)
}

/// Adds `coef * d_g w` to `target` over the bounding box of the dilated support.
fn add_action(target: &mut GridFn, w: &GridFn, w_radius: f64, g: &GroupElement, coef: f64) {
    let dim = target.dim;
    let amp = coef * g.amplitude(dim);
    let s = g.scale();
    let y = g.y_f64();
    let h = target.step();
    let reach = w_radius / s + 2.0 * w.step() / s + h;
    let lo: Vec<usize> = y
        .iter()
        .map(|c| (((c - reach + target.half_width) / h).floor().max(0.0)) as usize)
        .collect();
    let hi: Vec<usize> = y
        .iter()
        .map(|c| (((c + reach + target.half_width) / h).ceil() as usize).min(target.nodes - 1))
        .collect();
    let counts: Vec<usize> = lo.iter().zip(&hi).map(|(&l, &u)| (u + 1).saturating_sub(l)).collect();
    let total: usize = counts.iter().product();
    if total == 0 {
        return;
    }
    let adds: Vec<(usize, f64)> = (0..total)
        .into_par_iter()
        .filter_map(|c| {
            let mut rest = c;
            let mut z = [0.0; 8];
            let mut idx = 0usize;
            for a in (0..dim).rev() {
                let i = lo[a] + rest % counts[a];
                rest /= counts[a];
                z[a] = s * (target.coord(i) - y[a]);
                idx += i * target.stride(a);
            }
            let v = w.eval(&z[..dim]);
            (v != 0.0).then_some((idx, amp * v))
        })
        .collect();
    for (idx, v) in adds {
        target.values[idx] += v;
    }
    target.zero_shell();
}

/// `d_g w` sampled on the box of `w`.
pub fn apply_group(w: &GridFn, g: &GroupElement) -> GridFn {
    let mut out = GridFn { values: vec![0.0; w.values.len()], ..w.clone() };
    add_action(&mut out, w, w.support_radius(), g, 1.0);
    out
}

/// Samples `d_g^{-1} u` inside the ball of radius `window` (in the rescaled frame).
fn pull_back(u: &GridFn, g: &GroupElement, window: f64) -> GridFn {
    let dim = u.dim;
    let amp = 1.0 / g.amplitude(dim);
    let s = g.scale();
    let y = g.y_f64();
    let mut out = GridFn { values: vec![0.0; u.values.len()], ..u.clone() };
    out.values.par_iter_mut().enumerate().for_each(|(idx, v)| {
        let mut x = [0.0; 8];
        let mut rest = idx;
        for a in (0..dim).rev() {
            x[a] = u.coord(rest % u.nodes);
            rest /= u.nodes;
        }
        if x[..dim].iter().map(|c| c * c).sum::<f64>() > window * window {
            return;
        }
        let mut z = [0.0; 8];
        for a in 0..dim {
            z[a] = x[a] / s + y[a];
        }
        *v = amp * u.eval(&z[..dim]);
    });
    out.zero_shell();
    out
}

/// High-frequency remainder with unit gradient norm and wavelength shrinking like `1/(k+1)`.
pub fn vanishing_field(template: &GridFn, k: usize, big_k: usize) -> GridFn {
    let h = template.step();
    let reach = 0.75 * template.half_width;
    let omega = 0.9 * std::f64::consts::PI / h * (k + 1) as f64 / big_k.max(1) as f64;
    let mut eta = GridFn { values: vec![0.0; template.values.len()], ..template.clone() };
    let dim = template.dim;
    eta.values.par_iter_mut().enumerate().for_each(|(idx, v)| {
        let mut x = [0.0; 8];
        let mut rest = idx;
        for a in (0..dim).rev() {
            x[a] = template.coord(rest % template.nodes);
            rest /= template.nodes;
        }
        let s = 1.0 - x[..dim].iter().map(|c| c * c).sum::<f64>() / (reach * reach);
        if s > 0.0 {
            *v = s.powi(4) * (omega * x[0]).sin();
        }
    });
    eta.zero_shell();
    let g = eta.grad_sq().sqrt();
    if g > 0.0 {
        eta = eta.scaled(1.0 / g);
    }
    eta
}

/// `u_k = sum_n d_{k,n} w_n + remainder_scale * eta_k` for `k = 0..K`.
pub fn synthesize_sequence(
    profiles: &[GridFn],
    schedules: &[Vec<GroupElement>],
    remainder_scale: f64,
    big_k: usize,
) -> Result<Vec<GridFn>> {
    if profiles.is_empty() && !schedules.is_empty() || profiles.len() != schedules.len() {
        return Err(Error::InvalidParameter("one schedule per profile required".into()));
    }
    if big_k == 0 {
        return Err(Error::EmptyInput("sequence length K"));
    }
    if !remainder_scale.is_finite() || remainder_scale < 0.0 {
        return Err(Error::InvalidParameter("remainder_scale must be finite and >= 0".into()));
    }
    let Some(first) = profiles.first() else {
        return Err(Error::EmptyInput("profiles (use synthesize_vanishing for remainder only)"));
    };
    if profiles.iter().any(|p| !p.same_box(first)) {
        return Err(Error::GridMismatch);
    }
    for (n, s) in schedules.iter().enumerate() {
        if s.len() < big_k {
            return Err(Error::InvalidParameter(format!("schedule {n} has {} < K entries", s.len())));
        }
        if s.iter().any(|g| g.y.len() != first.dim || !(g.gamma > 1.0)) {
            return Err(Error::InvalidParameter(format!("schedule {n} has a malformed group element")));
        }
    }
    let radii: Vec<f64> = profiles.iter().map(GridFn::support_radius).collect();
    for k in 0..big_k {
        for n in 0..profiles.len() {
            if !fits_box(radii[n], &schedules[n][k], first) {
                return Err(Error::BumpLeavesBox { k, n });
            }
        }
    }
    let mut out = Vec::with_capacity(big_k);
    for k in 0..big_k {
        let mut u = GridFn { values: vec![0.0; first.values.len()], ..first.clone() };
        for (n, w) in profiles.iter().enumerate() {
            add_action(&mut u, w, radii[n], &schedules[n][k], 1.0);
        }
        if remainder_scale > 0.0 {
            u.axpy(remainder_scale, &vanishing_field(first, k, big_k));
        }
        out.push(u);
    }
    Ok(out)
}

/// Remainder-only sequence `remainder_scale * eta_k` on the given box.
pub fn synthesize_vanishing(
    half_width: f64,
    nodes: usize,
    dim: usize,
    remainder_scale: f64,
    big_k: usize,
) -> Result<Vec<GridFn>> {
    let t = GridFn::zeros(half_width, nodes, dim)?;
    Ok((0..big_k).map(|k| vanishing_field(&t, k, big_k).scaled(remainder_scale)).collect())
}

/// Kind of a synthetic profile schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Fixed,
    Translating,
    Concentrating,
}

/// Bump profile with its schedule recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileRecipe {
    pub kind: ScheduleKind,
    pub amplitude: f64,
    pub radius: f64,
    pub center: Vec<i64>,
    /// Lattice step added every `period` indices (translating kind).
    #[serde(default)]
    pub drift: Vec<i64>,
    #[serde(default = "default_period")]
    pub period: usize,
}

fn default_period() -> usize {
    3
}

/// Synthesizer configuration: box, group ratio, sequence length and recipes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    pub half_width: f64,
    pub nodes: usize,
    pub dim: usize,
    pub gamma: f64,
    pub length: usize,
    pub remainder_scale: f64,
    pub profiles: Vec<ProfileRecipe>,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            half_width: 16.0,
            nodes: 64,
            dim: 3,
            gamma: 2f64.powf(0.25),
            length: 24,
            remainder_scale: 0.05,
            profiles: vec![
                ProfileRecipe {
                    kind: ScheduleKind::Fixed,
                    amplitude: 1.0,
                    radius: 3.0,
                    center: vec![0, 0, 0],
                    drift: vec![],
                    period: 3,
                },
                ProfileRecipe {
                    kind: ScheduleKind::Translating,
                    amplitude: 0.8,
                    radius: 2.5,
                    center: vec![5, 5, 0],
                    drift: vec![1, 1, 0],
                    period: 3,
                },
                ProfileRecipe {
                    kind: ScheduleKind::Concentrating,
                    amplitude: 0.7,
                    radius: 4.0,
                    center: vec![-8, -8, 0],
                    drift: vec![],
                    period: 6,
                },
            ],
        }
    }
}

impl SynthesisConfig {
    pub fn schedule(&self, recipe: &ProfileRecipe) -> Result<Vec<GroupElement>> {
        if recipe.center.len() != self.dim || recipe.period == 0 {
            return Err(Error::InvalidParameter("recipe center must have N entries and period >= 1".into()));
        }
        Ok((0..self.length)
            .map(|k| {
                let steps = (k / recipe.period) as i64;
                let (y, j) = match recipe.kind {
                    ScheduleKind::Fixed => (recipe.center.clone(), 0),
                    ScheduleKind::Translating => {
                        if recipe.drift.len() != self.dim {
                            (recipe.center.clone(), 0)
                        } else {
                            let y = recipe.center.iter().zip(&recipe.drift).map(|(c, d)| c + steps * d).collect();
                            (y, 0)
                        }
                    }
                    ScheduleKind::Concentrating => (recipe.center.clone(), steps as i32),
                };
                GroupElement { y, j, gamma: self.gamma }
            })
            .collect())
    }

    pub fn profiles(&self) -> Result<Vec<GridFn>> {
        self.profiles
            .iter()
            .map(|p| GridFn::bump(self.half_width, self.nodes, self.dim, p.amplitude, p.radius))
            .collect()
    }

    pub fn schedules(&self) -> Result<Vec<Vec<GroupElement>>> {
        self.profiles.iter().map(|p| self.schedule(p)).collect()
    }

    /// Returns `(profiles, schedules, sequence)`.
    pub fn synthesize(&self) -> Result<(Vec<GridFn>, Vec<Vec<GroupElement>>, Vec<GridFn>)> {
        if !(self.gamma > 1.0) {
            return Err(Error::InvalidParameter("gamma must exceed 1".into()));
        }
        let profiles = self.profiles()?;
        let schedules = self.schedules()?;
        let seq = if profiles.is_empty() {
            synthesize_vanishing(self.half_width, self.nodes, self.dim, self.remainder_scale, self.length)?
        } else {
            synthesize_sequence(&profiles, &schedules, self.remainder_scale, self.length)?
        };
        Ok((profiles, schedules, seq))
    }
}

/// Dilation class of an extracted profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileClass {
    N0,
    Nplus,
}

/// How the translations of a profile were modelled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum DriftModel {
    Constant { y: Vec<i64> },
    Affine { offset: Vec<f64>, slope: Vec<f64> },
    /// Tracked positions that neither model reproduces.
    Tracked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxProfiles,
    /// The last candidate did not lower the remainder; the result is partial.
    NoReduction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    /// Tail mean of the discrete `|grad d_{k,n} w_n|^2`.
    pub profile_energies: Vec<f64>,
    pub sum: f64,
    pub limsup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDecomposition {
    pub gamma: f64,
    /// Stored separately from the manifest (one CSV per profile).
    #[serde(skip)]
    pub profiles: Vec<GridFn>,
    pub schedules: Vec<Vec<GroupElement>>,
    pub labels: Vec<ProfileClass>,
    pub drift_models: Vec<DriftModel>,
    pub remainder_norms: Vec<f64>,
    pub initial_norm: f64,
    pub ledger: EnergyLedger,
    pub stop_reason: StopReason,
    pub partial: bool,
}

impl ProfileDecomposition {
    /// `u_k - sum_n d_{k,n} w_n`.
    pub fn remainder(&self, u_seq: &[GridFn], k: usize) -> GridFn {
        let mut r = u_seq[k].clone();
        for (n, w) in self.profiles.iter().enumerate() {
            add_action(&mut r, w, w.support_radius(), &self.schedules[n][k], -1.0);
        }
        r
    }
}

/// Tuning of the greedy extractor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeOptions {
    /// Radius of the localization window around a tracked peak, in lattice units.
    pub window: f64,
    pub j_span: i32,
    /// Largest lattice move of a peak between consecutive indices.
    pub track_radius: f64,
    pub backfit_sweeps: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self { window: 3.5, j_span: 6, track_radius: 2.0, backfit_sweeps: 2 }
    }
}

fn tail_start(big_k: usize) -> usize {
    big_k / 2
}

fn tail_mean_norm(res: &[GridFn], p: f64) -> f64 {
    let t = tail_start(res.len());
    res[t..].iter().map(|r| r.norm_lp(p)).sum::<f64>() / (res.len() - t) as f64
}

fn nearest_node(u: &GridFn, x: &[f64]) -> usize {
    let h = u.step();
    (0..u.dim).fold(0, |acc, a| {
        let i = ((x[a] + u.half_width) / h).round().clamp(0.0, (u.nodes - 1) as f64) as usize;
        acc + i * u.stride(a)
    })
}

/// Lattice point of the largest `|u|` within `radius` of `center` (whole box if `None`).
fn peak_near(u: &GridFn, center: Option<&[i64]>, radius: f64) -> (Vec<i64>, f64) {
    let mut x = vec![0.0; u.dim];
    let mut best = (vec![0; u.dim], -1.0);
    for (idx, v) in u.values.iter().enumerate() {
        u.index_to_point(idx, &mut x);
        if x.iter().any(|c| (c - c.round()).abs() > 1e-9) {
            continue;
        }
        if let Some(c) = center {
            let d2: f64 = x.iter().zip(c).map(|(a, b)| (a - *b as f64).powi(2)).sum();
            if d2 > radius * radius + 1e-9 {
                continue;
            }
        }
        if v.abs() > best.1 {
            best = (x.iter().map(|c| c.round() as i64).collect(), v.abs());
        }
    }
    best
}

/// Relative misfit of `r` near `y` against the template dilated by `delta` levels.
fn dilation_misfit(r: &GridFn, y: &[i64], tmpl: &GridFn, y_ref: &[i64], delta: i32, gamma: f64, window: f64) -> f64 {
    let dim = r.dim;
    let s = gamma.powi(delta);
    let amp = s.powf((dim as f64 - 2.0) / 2.0);
    let reach = window / s;
    let h = r.step();
    let half = (reach / h).ceil() as i64;
    let yc = nearest_node(r, &y.iter().map(|&c| c as f64).collect::<Vec<_>>());
    let mut centre = vec![0i64; dim];
    let mut rest = yc;
    for a in (0..dim).rev() {
        centre[a] = (rest % r.nodes) as i64;
        rest /= r.nodes;
    }
    let side = (2 * half + 1) as usize;
    let total = side.pow(dim as u32);
    let terms: Vec<(f64, f64)> = (0..total)
        .into_par_iter()
        .map(|c| {
            let mut rest = c;
            let mut off = [0.0; 8];
            let mut idx = 0usize;
            for a in (0..dim).rev() {
                let o = (rest % side) as i64 - half;
                rest /= side;
                let i = centre[a] + o;
                if i < 0 || i >= r.nodes as i64 {
                    return (0.0, 0.0);
                }
                off[a] = o as f64 * h;
                idx += i as usize * r.stride(a);
            }
            let d2: f64 = off[..dim].iter().map(|v| v * v).sum();
            if d2 > reach * reach {
                return (0.0, 0.0);
            }
            let mut z = [0.0; 8];
            for a in 0..dim {
                z[a] = s * off[a] + y_ref[a] as f64;
            }
            let pred = amp * tmpl.eval(&z[..dim]);
            let v = r.values[idx];
            ((v - pred).powi(2), v * v + pred * pred)
        })
        .collect();
    let (num, den) = terms.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    if den > 0.0 {
        num / den
    } else {
        f64::INFINITY
    }
}

fn fit_drift(ys: &[Vec<i64>]) -> DriftModel {
    let dim = ys[0].len();
    if ys.iter().all(|y| *y == ys[0]) {
        return DriftModel::Constant { y: ys[0].clone() };
    }
    let n = ys.len() as f64;
    let kbar = (n - 1.0) / 2.0;
    let skk: f64 = (0..ys.len()).map(|k| (k as f64 - kbar).powi(2)).sum();
    let mut offset = vec![0.0; dim];
    let mut slope = vec![0.0; dim];
    for a in 0..dim {
        let ybar = ys.iter().map(|y| y[a] as f64).sum::<f64>() / n;
        let sky: f64 = ys.iter().enumerate().map(|(k, y)| (k as f64 - kbar) * (y[a] as f64 - ybar)).sum();
        slope[a] = if skk > 0.0 { sky / skk } else { 0.0 };
        offset[a] = ybar - slope[a] * kbar;
    }
    let reproduces = ys.iter().enumerate().all(|(k, y)| {
        (0..dim).all(|a| (offset[a] + slope[a] * k as f64).round() as i64 == y[a])
    });
    if reproduces {
        DriftModel::Affine { offset, slope }
    } else {
        DriftModel::Tracked
    }
}

struct Candidate {
    schedule: Vec<GroupElement>,
    w_window: f64,
}

fn locate(res: &[GridFn], gamma: f64, opts: &DecomposeOptions) -> Candidate {
    let big_k = res.len();
    let last = big_k - 1;
    let (y_ref, _) = peak_near(&res[last], None, 0.0);
    let mut ys = vec![Vec::new(); big_k];
    ys[last] = y_ref.clone();
    for k in (0..last).rev() {
        ys[k] = peak_near(&res[k], Some(&ys[k + 1]), opts.track_radius).0;
    }
    let mut deltas = vec![0i32; big_k];
    for k in 0..last {
        let mut best = (0, f64::INFINITY);
        for delta in -opts.j_span..=opts.j_span {
            let m = dilation_misfit(&res[k], &ys[k], &res[last], &y_ref, delta, gamma, opts.window);
            if m < best.1 - 1e-12 {
                best = (delta, m);
            }
        }
        deltas[k] = best.0;
    }
    let base = *deltas.iter().min().unwrap_or(&0);
    let j_ref = -base;
    let schedule = (0..big_k)
        .map(|k| GroupElement { y: ys[k].clone(), j: deltas[k] - base, gamma })
        .collect();
    Candidate { schedule, w_window: opts.window * gamma.powi(j_ref) }
}

/// Cesaro average of the rescaled tail iterates and its coherence
/// `|avg|_{2*} / avg |v_k|_{2*}`, near 1 for a genuine profile and small for noise.
fn cesaro_profile(res: &[GridFn], schedule: &[GroupElement], w_window: f64) -> (GridFn, f64) {
    let t = tail_start(res.len());
    let two_star = critical_exponent(res[0].dim);
    let mut acc = GridFn { values: vec![0.0; res[0].values.len()], ..res[0].clone() };
    let mut mean_norm = 0.0;
    for k in t..res.len() {
        let v = pull_back(&res[k], &schedule[k], w_window);
        mean_norm += v.norm_lp(two_star);
        acc.axpy(1.0, &v);
    }
    let n = (res.len() - t) as f64;
    let w = acc.scaled(1.0 / n);
    let coherence = if mean_norm > 0.0 { w.norm_lp(two_star) / (mean_norm / n) } else { 0.0 };
    (w, coherence)
}

fn subtract(res: &mut [GridFn], w: &GridFn, schedule: &[GroupElement], coef: f64) {
    let radius = w.support_radius();
    for (k, r) in res.iter_mut().enumerate() {
        add_action(r, w, radius, &schedule[k], -coef);
    }
}

/// Greedy profile extraction with default options.
pub fn decompose(u_seq: &[GridFn], gamma: f64, max_profiles: usize, tol: f64) -> Result<ProfileDecomposition> {
    decompose_with(u_seq, gamma, max_profiles, tol, &DecomposeOptions::default())
}

pub fn decompose_with(
    u_seq: &[GridFn],
    gamma: f64,
    max_profiles: usize,
    tol: f64,
    opts: &DecomposeOptions,
) -> Result<ProfileDecomposition> {
    let Some(first) = u_seq.first() else {
        return Err(Error::EmptyInput("sequence"));
    };
    if u_seq.len() < 2 {
        return Err(Error::InvalidParameter("decomposition needs at least two iterates".into()));
    }
    if u_seq.iter().any(|u| !u.same_box(first)) {
        return Err(Error::GridMismatch);
    }
    if !(gamma > 1.0) || !(tol > 0.0) || !(opts.window > 0.0) || opts.j_span < 0 {
        return Err(Error::InvalidParameter("need gamma > 1, tol > 0, window > 0, j_span >= 0".into()));
    }
    let energies: Vec<f64> = u_seq.iter().map(GridFn::grad_sq).collect();
    if energies.iter().any(|e| !e.is_finite() || *e > 1e12) {
        return Err(Error::UnboundedEnergy);
    }
    let two_star = critical_exponent(first.dim);
    let limsup = energies[tail_start(u_seq.len())..].iter().fold(0.0f64, |a, &b| a.max(b));

    let mut res: Vec<GridFn> = u_seq.to_vec();
    let initial = tail_mean_norm(&res, two_star);
    let mut profiles: Vec<GridFn> = Vec::new();
    let mut schedules: Vec<Vec<GroupElement>> = Vec::new();
    let mut windows: Vec<f64> = Vec::new();
    let mut current = initial;
    let stop_reason = loop {
        if current <= tol * initial || initial == 0.0 {
            break StopReason::Tolerance;
        }
        if profiles.len() >= max_profiles {
            break StopReason::MaxProfiles;
        }
        let cand = locate(&res, gamma, opts);
        let (w, coherence) = cesaro_profile(&res, &cand.schedule, cand.w_window);
        let mut trial = res.clone();
        subtract(&mut trial, &w, &cand.schedule, 1.0);
        let next = tail_mean_norm(&trial, two_star);
        if w.is_zero() || coherence < MIN_COHERENCE || !(next < 0.99 * current) {
            break StopReason::NoReduction;
        }
        res = trial;
        current = next;
        profiles.push(w);
        schedules.push(cand.schedule);
        windows.push(cand.w_window);
    };

    for _ in 0..opts.backfit_sweeps {
        for n in 0..profiles.len() {
            subtract(&mut res, &profiles[n], &schedules[n], -1.0);
            profiles[n] = cesaro_profile(&res, &schedules[n], windows[n]).0;
            subtract(&mut res, &profiles[n], &schedules[n], 1.0);
        }
    }

    let mut order: Vec<usize> = (0..profiles.len()).collect();
    let key = |n: usize| {
        let s = &schedules[n];
        let dilates = s.iter().any(|g| g.j != 0);
        let dist: i64 = s[s.len() - 1].y.iter().map(|c| c * c).sum();
        (dilates, dist)
    };
    order.sort_by_key(|&n| key(n));
    let mut profiles: Vec<GridFn> = order.iter().map(|&n| profiles[n].clone()).collect();
    let mut schedules: Vec<Vec<GroupElement>> = order.iter().map(|&n| schedules[n].clone()).collect();

    let labels: Vec<ProfileClass> = schedules
        .iter()
        .map(|s| if s.iter().all(|g| g.j == 0) { ProfileClass::N0 } else { ProfileClass::Nplus })
        .collect();
    // A constant translation of an undilated profile is absorbed into the profile.
    for n in 0..profiles.len() {
        let s = &schedules[n];
        if labels[n] == ProfileClass::N0 && s.iter().all(|g| g.y == s[0].y) && s[0].y.iter().any(|&c| c != 0) {
            let shift = GroupElement { y: s[0].y.clone(), j: 0, gamma };
            profiles[n] = apply_group(&profiles[n], &shift);
            for g in schedules[n].iter_mut() {
                g.y = vec![0; first.dim];
            }
        }
    }
    let drift_models = schedules
        .iter()
        .map(|s| fit_drift(&s.iter().map(|g| g.y.clone()).collect::<Vec<_>>()))
        .collect();
    let t = tail_start(u_seq.len());
    let profile_energies: Vec<f64> = profiles
        .iter()
        .zip(&schedules)
        .map(|(w, s)| {
            s[t..].iter().map(|g| apply_group(w, g).grad_sq()).sum::<f64>() / (s.len() - t) as f64
        })
        .collect();
    let sum = profile_energies.iter().sum();
    let remainder_norms = res.iter().map(|r| r.norm_lp(two_star)).collect();
    Ok(ProfileDecomposition {
        gamma,
        profiles,
        schedules,
        labels,
        drift_models,
        remainder_norms,
        initial_norm: initial,
        ledger: EnergyLedger { profile_energies, sum, limsup },
        stop_reason,
        partial: stop_reason == StopReason::NoReduction && current > tol * initial,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationCheck {
    pub pair: (usize, usize),
    pub first: f64,
    pub last: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpCheck {
    pub p: f64,
    pub norms: Vec<f64>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TintaReport {
    pub separation: Vec<SeparationCheck>,
    pub separation_ok: bool,
    pub ledger_ok: bool,
    pub remainder_ok: bool,
    /// Present only when every label is `N0`.
    pub lp: Option<Vec<LpCheck>>,
    pub lp_ok: bool,
    pub all_ok: bool,
}

impl TintaReport {
    pub fn offending_pairs(&self) -> Vec<(usize, usize)> {
        self.separation.iter().filter(|s| !s.ok).map(|s| s.pair).collect()
    }
}

/// Norms along the tail must shrink overall: last below first and a non-positive log trend.
fn decreasing_tail(norms: &[f64]) -> bool {
    let t = tail_start(norms.len());
    let tail = &norms[t..];
    if tail.iter().all(|v| *v <= 1e-14) {
        return true;
    }
    let first = tail[0];
    let last = tail[tail.len() - 1];
    if !(last <= first * (1.0 + 1e-9)) {
        return false;
    }
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(k, v)| (k as f64, v.ln()))
        .collect();
    if pts.len() < 2 {
        return true;
    }
    let n = pts.len() as f64;
    let xb = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let yb = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - xb) * (p.1 - yb)).sum();
    sxy <= 1e-12
}

/// Checks separation growth, the energy ledger and remainder decay.
pub fn verify_tinta_invariants(d: &ProfileDecomposition, u_seq: &[GridFn], tol: f64) -> Result<TintaReport> {
    if d.schedules.iter().any(|s| s.len() != u_seq.len()) || d.remainder_norms.len() != u_seq.len() {
        return Err(Error::InvalidParameter("decomposition and sequence lengths differ".into()));
    }
    let big_k = u_seq.len();
    let t = tail_start(big_k);
    let mut separation = Vec::new();
    for n in 0..d.schedules.len() {
        for m in n + 1..d.schedules.len() {
            let first = separation_of(&d.schedules[n][t], &d.schedules[m][t]);
            let last = separation_of(&d.schedules[n][big_k - 1], &d.schedules[m][big_k - 1]);
            separation.push(SeparationCheck { pair: (n, m), first, last, ok: last > first });
        }
    }
    let separation_ok = separation.iter().all(|s| s.ok);
    let ledger_ok = d.ledger.sum <= d.ledger.limsup + tol;
    let remainder_ok = decreasing_tail(&d.remainder_norms);
    let lp = if d.labels.iter().all(|l| *l == ProfileClass::N0) {
        let remainders: Vec<GridFn> = (0..big_k).map(|k| d.remainder(u_seq, k)).collect();
        Some(
            [3.0, 4.0, 5.0]
                .iter()
                .map(|&p| {
                    let norms: Vec<f64> = remainders.iter().map(|r| r.norm_lp(p)).collect();
                    let ok = decreasing_tail(&norms);
                    LpCheck { p, norms, ok }
                })
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };
    let lp_ok = lp.as_ref().map_or(true, |v| v.iter().all(|c| c.ok));
    Ok(TintaReport {
        all_ok: separation_ok && ledger_ok && remainder_ok && lp_ok,
        separation,
        separation_ok,
        ledger_ok,
        remainder_ok,
        lp,
        lp_ok,
    })
}

fn separation_of(a: &GroupElement, b: &GroupElement) -> f64 {
    separation(a, b).max(separation(b, a))
}

/// Estimated constant of the splitting inequality for `M` summands.
pub fn splitting_inequality_constant(
    g: &NonlinearitySpec,
    dim: usize,
    m: usize,
    trials: usize,
) -> Result<SplittingEstimate> {
    if !(2..=5).contains(&m) {
        return Err(Error::InvalidParameter(format!("M = {m} outside 2..=5")));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    g.validate()?;
    let big_g = |s: f64| g.primitive(s);
    Ok(splitting_estimate(&big_g, dim, m, trials, 11))
}

/// `int |d_{k,1} w1|^{2*-1} |d_{k,2} w2|` along the schedules.
pub fn bilinear_overlap_decay(
    w1: &GridFn,
    w2: &GridFn,
    s1: &[GroupElement],
    s2: &[GroupElement],
) -> Result<Vec<f64>> {
    if !w1.same_box(w2) {
        return Err(Error::GridMismatch);
    }
    if s1.len() != s2.len() {
        return Err(Error::InvalidParameter("schedules differ in length".into()));
    }
    let two_star = critical_exponent(w1.dim);
    let (r1, r2) = (w1.support_radius(), w2.support_radius());
    let cell = w1.cell();
    Ok(s1
        .iter()
        .zip(s2)
        .map(|(g1, g2)| {
            let mut a = GridFn { values: vec![0.0; w1.values.len()], ..w1.clone() };
            add_action(&mut a, w1, r1, g1, 1.0);
            let mut b = GridFn { values: vec![0.0; w2.values.len()], ..w2.clone() };
            add_action(&mut b, w2, r2, g2, 1.0);
            a.values
                .iter()
                .zip(&b.values)
                .map(|(x, y)| x.abs().powf(two_star - 1.0) * y.abs())
                .sum::<f64>()
                * cell
        })
        .collect())
}
