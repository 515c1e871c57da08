//! `pyrewatch`: analysis, simulation and design of UAV-assisted IoT
//! wildfire detection.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod manifest;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pyrewatch_core::monte_carlo::{BoundaryMode, VerificationScope};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] pyrewatch_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use pyrewatch_core::Error as E;
        match self {
            CliError::Core(E::Numerical(_)) => 3,
            CliError::Core(E::Infeasible(_)) => 4,
            CliError::Core(_) | CliError::Usage(_) => 2,
            CliError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pyrewatch", version, about = "Early wildfire detection with UAV-assisted IoT sensor networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario JSON; missing keys take the reference defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,

    /// Radial quadrature points.
    #[arg(long, default_value_t = 200)]
    quad_points: usize,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Sensor densities per km², as `start:stop:step` or a comma list.
    #[arg(long, default_value = "10:400:10")]
    lambdas: String,

    /// Flag thresholds, as `start:stop:step` or a comma list.
    #[arg(long, default_value = "1:32:1")]
    thresholds: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Boundary {
    Interior,
    Torus,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Scope {
    PerUav,
    SystemWide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Metric {
    /// `π_D` at every step.
    #[value(name = "pi_D")]
    PiD,
    /// `π_D[K]`.
    #[value(name = "pi_D_K")]
    PiDK,
    /// Expected loss over the fallback horizon.
    #[value(name = "expected_loss")]
    ExpectedLoss,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detection curve of one scenario.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Report bookkeeping discrepancies and a quadrature-doubling check.
        #[arg(long)]
        validate: bool,
    },
    /// Monte Carlo estimate of the detection curve.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "interior")]
        boundary: Boundary,
        #[arg(long, value_enum, default_value = "per-uav")]
        verification: Scope,
    },
    /// Maximize `π_D[K]` under a budget.
    OptimizeDetection {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
        /// Budgets, comma separated; defaults to the scenario budget.
        #[arg(long)]
        budget: Option<String>,
    },
    /// Minimize expected wildfire losses over budgets.
    OptimizeLosses {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
        /// Budgets, comma separated or `lo:hi:per_decade` log-spaced.
        #[arg(long, default_value = "1e4:1e7:10")]
        budgets: String,
    },
    /// Optimal UAV altitude for target edge SNRs.
    Altitude {
        #[command(flatten)]
        common: Common,
        /// Target edge SNRs in dB, comma separated.
        #[arg(long, default_value = "0,5,10", allow_hyphen_values = true)]
        snr_db: String,
        /// Altitude samples in the radius-versus-altitude table.
        #[arg(long, default_value_t = 61)]
        sweep_points: usize,
    },
    /// One-parameter sweep in long format.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `key=start:stop:step`, key a scenario field.
        #[arg(long)]
        vary: String,
        /// Extra axis over flag thresholds, comma separated.
        #[arg(long)]
        flag_thresholds: Option<String>,
        #[arg(long, value_enum, default_value = "pi_D_K")]
        metric: Metric,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("PYREWATCH_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Usage(format!("PYREWATCH_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the worker pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Analyze { common, validate } => commands::analyze(&common, validate),
        Command::Simulate {
            common,
            trials,
            seed,
            boundary,
            verification,
        } => {
            let boundary = match boundary {
                Boundary::Interior => BoundaryMode::InteriorIgnition,
                Boundary::Torus => BoundaryMode::Torus,
            };
            let scope = match verification {
                Scope::PerUav => VerificationScope::PerUav,
                Scope::SystemWide => VerificationScope::SystemWide,
            };
            commands::simulate(&common, trials, seed, boundary, scope)
        }
        Command::OptimizeDetection { common, grid, budget } => commands::optimize_detection(&common, &grid, budget.as_deref()),
        Command::OptimizeLosses { common, grid, budgets } => commands::optimize_losses(&common, &grid, &budgets),
        Command::Altitude {
            common,
            snr_db,
            sweep_points,
        } => commands::altitude(&common, &snr_db, sweep_points),
        Command::Sweep {
            common,
            vary,
            flag_thresholds,
            metric,
        } => commands::sweep(&common, &vary, flag_thresholds.as_deref(), metric),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
