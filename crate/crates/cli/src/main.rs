mod commands;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "crit-elliptic", version, about = "Critical semilinear elliptic toolkit")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Seed for randomized samplers.
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    /// Override the radial node count M.
    #[arg(long, global = true)]
    pub grid_nodes: Option<usize>,
    /// Override the radial truncation R_max.
    #[arg(long, global = true)]
    pub rmax: Option<f64>,
    /// Override the solver residual tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check every standing hypothesis of a problem file.
    Check { problem: PathBuf },
    /// Sobolev-type constants and the derived exponents.
    Constants { problem: PathBuf },
    /// Radial ground state by mountain pass or Nehari minimization.
    Solve {
        problem: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Mp)]
        method: MethodArg,
        #[arg(long, default_value_t = 1)]
        starts: usize,
    },
    /// Maxima of the energy along bubble paths against the minimax bound.
    Minimax {
        problem: PathBuf,
        /// Comma-separated eps values; defaults to 10 log-spaced points on [1e-4, 1e-1].
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        eps_grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0)]
        jk: i32,
    },
    /// Synthesize, decompose and verify profile decompositions.
    Profiles {
        #[command(subcommand)]
        action: ProfilesAction,
    },
    /// Slopes of the bubble-family asymptotics.
    Ozao {
        /// Comma-separated eps values; defaults to 2^-4 .. 2^-10.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        eps_grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = 10.0)]
        rho: f64,
        #[arg(long, default_value_t = 3)]
        dimension: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum ProfilesAction {
    /// Write a synthesized sequence (config JSON optional; defaults to three profiles).
    Synthesize { config: Option<PathBuf> },
    /// Decompose the sequence stored in a directory.
    Decompose {
        sequence: PathBuf,
        #[arg(long, default_value_t = 6)]
        max_profiles: usize,
        #[arg(long, default_value_t = 0.05)]
        profile_tol: f64,
    },
    /// Print the invariant scoreboard for a sequence and its decomposition.
    Verify {
        sequence: PathBuf,
        /// Decomposition directory; decomposed afresh when omitted.
        #[arg(long)]
        decomposition: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-6)]
        ledger_tol: f64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Mp,
    Nehari,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Finding(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Finding(_) => 1,
            _ => 2,
        }
    }
}

impl From<crit_elliptic::Error> for CliError {
    fn from(e: crit_elliptic::Error) -> Self {
        use crit_elliptic::Error as E;
        match e {
            E::NoMountainPassGeometry
            | E::Stagnated(_)
            | E::NoRayRoot
            | E::Precondition(_)
            | E::ConstraintNotAttainable
            | E::ConstructionFailed(_)
            | E::UnboundedEnergy => Self::Finding(e.to_string()),
            _ => Self::Input(e.to_string()),
        }
    }
}

/// Whether a command's finding is positive (exit 0) or negative (exit 1).
pub enum Outcome {
    Positive,
    Negative,
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("CRIT_ELLIPTIC_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::Input(format!("CRIT_ELLIPTIC_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    configure_threads()?;
    std::fs::create_dir_all(&cli.global.out)?;
    let g = &cli.global;
    match cli.command {
        Command::Check { problem } => commands::check(g, &problem),
        Command::Constants { problem } => commands::constants(g, &problem),
        Command::Solve { problem, method, starts } => commands::solve(g, &problem, method, starts),
        Command::Minimax { problem, eps_grid, jk } => commands::minimax(g, &problem, eps_grid, jk),
        Command::Profiles { action } => commands::profiles(g, action),
        Command::Ozao { eps_grid, rho, dimension } => commands::ozao(g, eps_grid, rho, dimension),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Outcome::Positive) => ExitCode::SUCCESS,
        Ok(Outcome::Negative) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
