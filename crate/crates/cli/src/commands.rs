use crate::output::{read_grid_csv, read_json, to_json, write_csv, write_grid_csv, write_json};
use crate::{CliError, Global, MethodArg, Outcome, ProfilesAction};
use crit_elliptic::constants::{compute_constants, ConstantsReport};
use crit_elliptic::energy::ProblemSpec;
use crit_elliptic::problem::{check_problem, ProblemFile};
use crit_elliptic::profiles::{
    decompose, verify_tinta_invariants, GridFn, GroupElement, ProfileDecomposition, SynthesisConfig,
};
use crit_elliptic::radial::RadialGrid;
use crit_elliptic::serde_num::format as num;
use crit_elliptic::solver::{
    default_eps_grid, dyadic_eps, ground_state_scan, minimax_bound, regress_ozao_asymptotics, solve_mountain_pass,
    solve_nehari, GroundStateReport, SolveReport,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

fn load_problem(g: &Global, path: &Path) -> Result<(ProblemFile, ProblemSpec), CliError> {
    let mut file: ProblemFile = read_json(path)?;
    if let Some(m) = g.grid_nodes {
        file.grid.nodes = m;
    }
    if let Some(r) = g.rmax {
        file.grid.r_max = r;
    }
    if let Some(t) = g.tol {
        file.tolerances.residual = t;
    }
    let spec = file.to_spec()?;
    Ok((file, spec))
}

fn problem_constants(file: &ProblemFile, p: &ProblemSpec) -> Result<ConstantsReport, CliError> {
    Ok(compute_constants(&p.g, &p.grid, p.b0(), p.b_sup(), file.tolerances.restarts)?)
}

fn emit<T: Serialize>(g: &Global, value: &T, human: impl FnOnce()) -> Result<(), CliError> {
    if g.json {
        print!("{}", to_json(value)?);
    } else {
        human();
    }
    Ok(())
}

pub fn check(g: &Global, path: &Path) -> Result<Outcome, CliError> {
    let (file, p) = load_problem(g, path)?;
    let summary = check_problem(&p, file.tolerances.restarts)?;
    let dir = g.out.join("reports");
    std::fs::create_dir_all(&dir)?;
    for r in &summary.reports {
        let name = r.hypothesis.replace('*', "star").replace(['/', ' '], "_");
        write_json(&dir.join(format!("{name}.json")), r)?;
    }
    write_json(&dir.join("summary.json"), &summary)?;
    emit(g, &summary, || {
        for r in &summary.reports {
            let req = if summary.required.contains(&r.hypothesis) { "required" } else { "optional" };
            println!("{:<8} {:<18} {:<9} margin {}", r.hypothesis, format!("{:?}", r.verdict), req, num(r.worst_margin));
        }
        println!(
            "overall: {}",
            if summary.all_required_certified { "all required hypotheses certified" } else { "not certified" }
        );
    })?;
    Ok(if summary.all_required_certified { Outcome::Positive } else { Outcome::Negative })
}

pub fn constants(g: &Global, path: &Path) -> Result<Outcome, CliError> {
    let (file, p) = load_problem(g, path)?;
    let c = problem_constants(&file, &p)?;
    write_json(&g.out.join("constants.json"), &c)?;
    emit(g, &c, || {
        println!("{:<12} {}", "S", num(c.s));
        println!("{:<12} {}", "S_Gbar", num(c.s_gbar));
        println!("{:<12} {}", "S_Gbar_b", num(c.s_gbar_b));
        println!("{:<12} {}", "kappa*", num(c.kappa_star));
        println!("{:<12} {}", "mu*", num(c.mu_star));
        println!("{:<12} {}", "lambda*", num(c.lambda_star));
        for w in &c.warnings {
            println!("warning: {w}");
        }
    })?;
    Ok(Outcome::Positive)
}

#[derive(Serialize)]
struct SolveOutput {
    report: SolveReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    scan: Option<GroundStateReport>,
    #[serde(with = "crit_elliptic::serde_num::opt", skip_serializing_if = "Option::is_none")]
    minimax_bound: Option<f64>,
    /// bound - energy; positive when the energy sits below the bound.
    #[serde(with = "crit_elliptic::serde_num::opt", skip_serializing_if = "Option::is_none")]
    bound_margin: Option<f64>,
}

pub fn solve(g: &Global, path: &Path, method: MethodArg, starts: usize) -> Result<Outcome, CliError> {
    let (file, p) = load_problem(g, path)?;
    let mut cfg = file.solver_config();
    cfg.rng_seed = g.seed;
    if starts == 0 {
        return Err(CliError::Input("--starts must be at least 1".into()));
    }
    let (report, scan) = match (method, starts) {
        (MethodArg::Mp, 1) => (solve_mountain_pass(&p, &cfg)?, None),
        (MethodArg::Nehari, 1) => (solve_nehari(&p, &cfg)?, None),
        (MethodArg::Mp, n) => {
            let scan = ground_state_scan(&p, n, &cfg)?;
            let best = scan.best.clone().ok_or_else(|| CliError::Finding("no start converged".into()))?;
            (best, Some(scan))
        }
        (MethodArg::Nehari, _) => return Err(CliError::Input("--starts > 1 requires --method mp".into())),
    };
    let bound = if p.g.is_zero() {
        None
    } else {
        Some(minimax_bound(&problem_constants(&file, &p)?, p.dim))
    };
    let out = SolveOutput {
        bound_margin: bound.map(|b| b - report.energy),
        minimax_bound: bound,
        report,
        scan,
    };
    write_json(&g.out.join("solve.json"), &out)?;
    {
        let u = &out.report.solution;
        let grid = u.grid();
        let rows = (0..grid.len()).map(|i| vec![num(grid.r(i)), num(u.values()[i])]);
        write_csv(&g.out.join("solution.csv"), &["r", "u"], rows)?;
    }
    emit(g, &out, || {
        let r = &out.report;
        println!("energy              {}", num(r.energy));
        println!("relative residual   {}", num(r.relative_residual));
        match r.pohozaev_residual {
            Some(v) => println!("Pohozaev residual   {}", num(v)),
            None => println!("Pohozaev residual   n/a (non-autonomous)"),
        }
        if let (Some(b), Some(m)) = (out.minimax_bound, out.bound_margin) {
            println!("minimax bound       {}  (margin {})", num(b), num(m));
        }
        if let Some(s) = &out.scan {
            println!("ground-state estimate {} over {} starts", num(s.estimate), s.starts);
        }
    })?;
    Ok(Outcome::Positive)
}

pub fn minimax(g: &Global, path: &Path, eps_grid: Option<Vec<f64>>, jk: i32) -> Result<Outcome, CliError> {
    let eps = eps_grid.unwrap_or_else(default_eps_grid);
    if eps.is_empty() {
        return Err(CliError::Input("empty --eps-grid".into()));
    }
    let (file, p) = load_problem(g, path)?;
    let c = problem_constants(&file, &p)?;
    let rep = crit_elliptic::solver::verify_minimax_bound(&p, &c, &eps, jk)?;
    let rows = rep.entries.iter().map(|e| {
        vec![num(e.eps), num(e.max), num(rep.bound), num(e.max - rep.bound), e.admissible.to_string()]
    });
    write_csv(&g.out.join("minimax.csv"), &["eps", "max_t_I", "bound", "margin", "admissible"], rows)?;
    write_json(&g.out.join("minimax.json"), &rep)?;
    emit(g, &rep, || {
        println!("bound {}", num(rep.bound));
        for e in &rep.entries {
            println!("eps {:<24} max_t I {:<24} margin {}", num(e.eps), num(e.max), num(e.max - rep.bound));
        }
        println!("verdict: {}", if rep.verdict { "strictly below the bound" } else { "bound not met" });
    })?;
    Ok(if rep.verdict { Outcome::Positive } else { Outcome::Negative })
}

pub fn ozao(g: &Global, eps_grid: Option<Vec<f64>>, rho: f64, dim: usize) -> Result<Outcome, CliError> {
    let eps = eps_grid.unwrap_or_else(|| dyadic_eps(4, 10));
    if eps.len() < 4 {
        return Err(CliError::Input(format!("--eps-grid needs at least 4 values, got {}", eps.len())));
    }
    let grid = RadialGrid::new(dim, g.grid_nodes.unwrap_or(1 << 18), g.rmax.unwrap_or(2.0 * rho))?;
    let rep = regress_ozao_asymptotics(&eps, rho, &grid)?;
    let rows = rep.fits.iter().map(|f| {
        let name = match f.q {
            Some(q) => format!("{}_q{}", f.quantity, num(q)),
            None => f.quantity.clone(),
        };
        vec![name, num(f.slope), num(f.expected), num(f.rel_err)]
    });
    write_csv(&g.out.join("ozao.csv"), &["quantity", "fitted_slope", "expected_exponent", "rel_err"], rows)?;
    emit(g, &rep, || {
        for f in &rep.fits {
            println!(
                "{:<12} q {:<6} slope {:<22} expected {:<8} rel_err {}",
                f.quantity,
                f.q.map(num).unwrap_or_else(|| "-".into()),
                num(f.slope),
                num(f.expected),
                num(f.rel_err)
            );
        }
    })?;
    Ok(if rep.fits.iter().all(|f| f.ok) { Outcome::Positive } else { Outcome::Negative })
}

#[derive(Debug, Serialize, Deserialize)]
struct SequenceManifest {
    #[serde(with = "crit_elliptic::serde_num")]
    half_width: f64,
    nodes: usize,
    dim: usize,
    #[serde(with = "crit_elliptic::serde_num")]
    gamma: f64,
    files: Vec<String>,
    /// Ground truth when the sequence was synthesized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<SynthesisConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    schedules: Vec<Vec<GroupElement>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    truth_files: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DecompositionManifest {
    note: String,
    profile_files: Vec<String>,
    decomposition: ProfileDecomposition,
}

const SUBSEQUENCE_NOTE: &str =
    "the finite sequence is processed as given; no subsequence is extracted or renumbered";

fn load_sequence(dir: &Path) -> Result<(SequenceManifest, Vec<GridFn>), CliError> {
    let m: SequenceManifest = read_json(&dir.join("sequence.json"))?;
    let seq = m
        .files
        .iter()
        .map(|f| read_grid_csv(&dir.join(f), m.half_width, m.nodes, m.dim))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((m, seq))
}

fn load_decomposition(dir: &Path, m: &SequenceManifest) -> Result<ProfileDecomposition, CliError> {
    let man: DecompositionManifest = read_json(&dir.join("decomposition.json"))?;
    let mut d = man.decomposition;
    d.profiles = man
        .profile_files
        .iter()
        .map(|f| read_grid_csv(&dir.join(f), m.half_width, m.nodes, m.dim))
        .collect::<Result<Vec<_>, _>>()?;
    if d.profiles.len() != d.schedules.len() {
        return Err(CliError::Input("profile files and schedules differ in number".into()));
    }
    Ok(d)
}

pub fn profiles(g: &Global, action: ProfilesAction) -> Result<Outcome, CliError> {
    match action {
        ProfilesAction::Synthesize { config } => {
            let cfg: SynthesisConfig = match config {
                Some(p) => read_json(&p)?,
                None => SynthesisConfig::default(),
            };
            let (truth, schedules, seq) = cfg.synthesize()?;
            let files: Vec<String> = (0..seq.len()).map(|k| format!("u_{k:03}.csv")).collect();
            for (f, u) in files.iter().zip(&seq) {
                write_grid_csv(&g.out.join(f), u)?;
            }
            let truth_files: Vec<String> = (0..truth.len()).map(|n| format!("truth_{n}.csv")).collect();
            for (f, w) in truth_files.iter().zip(&truth) {
                write_grid_csv(&g.out.join(f), w)?;
            }
            let m = SequenceManifest {
                half_width: cfg.half_width,
                nodes: cfg.nodes,
                dim: cfg.dim,
                gamma: cfg.gamma,
                files,
                config: Some(cfg),
                schedules,
                truth_files,
            };
            write_json(&g.out.join("sequence.json"), &m)?;
            emit(g, &m, || println!("wrote {} iterates to {}", m.files.len(), g.out.display()))?;
            Ok(Outcome::Positive)
        }
        ProfilesAction::Decompose { sequence, max_profiles, profile_tol } => {
            let (m, seq) = load_sequence(&sequence)?;
            let d = decompose(&seq, m.gamma, max_profiles, profile_tol)?;
            let profile_files: Vec<String> = (0..d.profiles.len()).map(|n| format!("profile_{n}.csv")).collect();
            for (f, w) in profile_files.iter().zip(&d.profiles) {
                write_grid_csv(&g.out.join(f), w)?;
            }
            let man = DecompositionManifest { note: SUBSEQUENCE_NOTE.into(), profile_files, decomposition: d };
            write_json(&g.out.join("decomposition.json"), &man)?;
            let d = &man.decomposition;
            emit(g, &man, || {
                println!("profiles {}  stop {:?}  partial {}", d.profiles.len(), d.stop_reason, d.partial);
                for (n, l) in d.labels.iter().enumerate() {
                    println!("  {n}: {l:?}  energy {}", num(d.ledger.profile_energies[n]));
                }
                println!("ledger sum {}  limsup {}", num(d.ledger.sum), num(d.ledger.limsup));
            })?;
            Ok(Outcome::Positive)
        }
        ProfilesAction::Verify { sequence, decomposition, ledger_tol } => {
            let (m, seq) = load_sequence(&sequence)?;
            let d = match decomposition {
                Some(dir) => load_decomposition(&dir, &m)?,
                None => decompose(&seq, m.gamma, 6, 0.05)?,
            };
            let rep = verify_tinta_invariants(&d, &seq, ledger_tol)?;
            write_json(&g.out.join("verify.json"), &rep)?;
            let mark = |ok: bool| if ok { "PASS" } else { "FAIL" };
            emit(g, &rep, || {
                for s in &rep.separation {
                    println!(
                        "separation  pair ({}, {})  {} -> {}  {}",
                        s.pair.0,
                        s.pair.1,
                        num(s.first),
                        num(s.last),
                        mark(s.ok)
                    );
                }
                println!("separation  {}", mark(rep.separation_ok));
                println!("ledger      {}", mark(rep.ledger_ok));
                println!("remainder   {}", mark(rep.remainder_ok));
                match &rep.lp {
                    Some(v) => {
                        for c in v {
                            println!("L^{} remainder {}", num(c.p), mark(c.ok));
                        }
                    }
                    None => println!("L^p remainder  skipped (dilating profiles present)"),
                }
            })?;
            Ok(if rep.all_ok { Outcome::Positive } else { Outcome::Negative })
        }
    }
}
