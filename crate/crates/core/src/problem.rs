//! Problem files: the JSON description of `(V, V_P, f, f_P, g, b, b_P)` plus grid and tolerances.

use crate::constants::{compute_constants, ConstantsReport};
use crate::energy::ProblemSpec;
use crate::hypothesis::{
    check_f1, check_f2_tang, check_f3, check_g1_g2_g3, check_h_monotone, check_hinf, check_hstar, check_v1,
    CheckReport,
};
use crate::nonlinearity::NonlinearitySpec;
use crate::potential::{CoefficientSpec, PotentialSpec};
use crate::radial::RadialGrid;
use crate::solver::SolverConfig;
use crate::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_r_max", with = "crate::serde_num")]
    pub r_max: f64,
}

fn default_nodes() -> usize {
    4096
}

fn default_r_max() -> f64 {
    40.0
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nodes: default_nodes(), r_max: default_r_max() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative weak residual accepted by the solvers.
    #[serde(with = "crate::serde_num")]
    pub residual: f64,
    pub max_iter: usize,
    pub restarts: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { residual: 1e-6, max_iter: 5000, restarts: 8 }
    }
}

/// On-disk problem description. Periodic counterparts default to the limits at infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub dimension: usize,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub potential_periodic: Option<PotentialSpec>,
    pub subcritical: NonlinearitySpec,
    #[serde(default)]
    pub subcritical_periodic: Option<NonlinearitySpec>,
    pub critical: NonlinearitySpec,
    #[serde(default)]
    pub coefficient_b: Option<CoefficientSpec>,
    #[serde(default)]
    pub coefficient_b_periodic: Option<CoefficientSpec>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl ProblemFile {
    /// The model `-Δu + u = λ|u|^{p-2}u + |u|^{2*-2}u` on the standard grid.
    pub fn model(dim: usize, lambda: f64, p: f64) -> Self {
        Self {
            dimension: dim,
            potential: PotentialSpec::Constant { value: 1.0 },
            potential_periodic: None,
            subcritical: NonlinearitySpec::power(lambda, p),
            subcritical_periodic: None,
            critical: NonlinearitySpec::critical_power(dim),
            coefficient_b: None,
            coefficient_b_periodic: None,
            grid: GridConfig::default(),
            tolerances: Tolerances::default(),
        }
    }

    pub fn to_spec(&self) -> Result<ProblemSpec> {
        let grid = RadialGrid::new(self.dimension, self.grid.nodes, self.grid.r_max)?;
        let b = self.coefficient_b.clone().unwrap_or(CoefficientSpec::constant(1.0));
        let b_p = self.coefficient_b_periodic.clone().unwrap_or(CoefficientSpec::constant(b.limit()));
        let v_p = self
            .potential_periodic
            .clone()
            .unwrap_or(PotentialSpec::Constant { value: self.potential.eval(f64::INFINITY) });
        let spec = ProblemSpec {
            dim: self.dimension,
            v: self.potential.clone(),
            v_p,
            f: self.subcritical.clone(),
            f_p: self.subcritical_periodic.clone().unwrap_or_else(|| self.subcritical.clone()),
            g: self.critical.clone(),
            b,
            b_p,
            grid,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig { tol: self.tolerances.residual, max_iter: self.tolerances.max_iter, ..SolverConfig::default() }
    }
}

/// All hypothesis reports for a problem; `required` lists the ones the verdict depends on.
#[derive(Debug, Clone, Serialize)]
pub struct CheckSummary {
    pub reports: Vec<CheckReport>,
    pub required: Vec<String>,
    pub all_required_certified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsReport>,
}

const F1_EPS: [f64; 3] = [1e-1, 1e-2, 1e-3];

/// Runs every hypothesis checker. The monotonicity alternative is reported but not
/// required, and (H*) is required only when the problem differs from its limit.
pub fn check_problem(p: &ProblemSpec, restarts: usize) -> Result<CheckSummary> {
    p.validate()?;
    let coincides = p.v == p.v_p && p.f == p.f_p && p.b == p.b_p;
    let mut reports = vec![
        check_f1(&p.f, p.dim, &F1_EPS)?,
        check_f2_tang(&p.f),
        check_f3(&p.f, p.dim),
    ];
    let mut constants = None;
    if !p.g.is_zero() {
        let c = compute_constants(&p.g, &p.grid, p.b0(), p.b_sup(), restarts)?;
        let g = check_g1_g2_g3(&p.g, p.dim, p.b0(), p.b_sup(), c.s, c.s_gbar);
        reports.extend([g.g1, g.g2, g.g3]);
        constants = Some(c);
    }
    reports.push(check_v1(&p.v, &p.grid)?);
    reports.push(check_hstar(p));
    reports.push(check_hinf(p));
    reports.push(check_h_monotone(p));
    let required: Vec<String> = reports
        .iter()
        .map(|r| r.hypothesis.clone())
        .filter(|h| h != "h*" && (h != "H*" || !coincides))
        .collect();
    let all_required_certified = reports
        .iter()
        .filter(|r| required.contains(&r.hypothesis))
        .all(CheckReport::certified);
    Ok(CheckSummary { reports, required, all_required_certified, constants })
}
