//! `fdlimit`: profiles, far-field limits, parabolic runs, `m → 0` sweeps and
//! the acceptance suite from the command line.
//!
//! Exit status: 0 on success, 1 when a `verify` check fails or a computation
//! errors, 2 on configuration errors.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::InitKind;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] fdlimit::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0} verification check(s) failed")]
    Failed(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use fdlimit::Error as E;
        match self {
            Self::Config(_) => 2,
            Self::Core(E::InvalidParams(_) | E::Config(_) | E::Json(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fdlimit", version, about = "Singular profiles and m -> 0 limits for fast diffusion")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV/JSON artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed of the randomized comparison trials.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Profile integrator tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Default, Clone, Args)]
struct ParamArgs {
    #[arg(long)]
    n: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    m: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    rho1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// Extinction time.
    #[arg(long = "T")]
    t_horizon: Option<f64>,
}

#[derive(Debug, Default, Clone, Args)]
struct GridArgs {
    #[arg(long)]
    r_in: Option<f64>,
    #[arg(long)]
    r_out: Option<f64>,
    #[arg(long)]
    nr: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    nt: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the derived constants as flat JSON.
    Constants {
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Integrate the singular profile and emit it on the integration grid.
    Profile {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        rho_max: Option<f64>,
        #[arg(long)]
        rho0: Option<f64>,
    },
    /// Sample w = r^2 v on a geometric ladder and extrapolate its limit.
    Farfield {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        r_min: Option<f64>,
        #[arg(long)]
        r_max: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Solve the radial parabolic problem on an annulus.
    Parabolic {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        lambda1: Option<f64>,
        #[arg(long)]
        lambda2: Option<f64>,
        #[arg(long, value_enum)]
        init: Option<InitKind>,
        /// Node values for `--init file`, one per line.
        #[arg(long)]
        init_file: Option<PathBuf>,
        /// Barenblatt shape parameter.
        #[arg(long)]
        k: Option<f64>,
    },
    /// Distances of v^(m) and its derivatives to v^(0).
    SweepElliptic {
        #[command(flatten)]
        params: ParamArgs,
        /// Comma-separated exponents.
        #[arg(long, value_delimiter = ',')]
        m_values: Option<Vec<f64>>,
        #[arg(long)]
        r_lo: Option<f64>,
        #[arg(long)]
        r_hi: Option<f64>,
    },
    /// Distances of parabolic solutions u^(m) to u^(0).
    SweepParabolic {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_delimiter = ',')]
        m_values: Option<Vec<f64>>,
        #[arg(long)]
        lambda1: Option<f64>,
        #[arg(long)]
        lambda2: Option<f64>,
        /// lower, upper or geomean.
        #[arg(long, value_enum)]
        init: Option<InitKind>,
    },
    /// Acceptance checks.
    Verify {
        #[command(subcommand)]
        which: VerifyCommand,
    },
}

#[derive(Debug, Subcommand)]
enum VerifyCommand {
    /// Residual refinement studies of the exact solutions.
    Exact,
    /// Every acceptance criterion, one line each.
    All {
        /// Run only these criteria (comma-separated ids).
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<u8>>,
        /// Skip these criteria.
        #[arg(long, value_delimiter = ',')]
        skip: Option<Vec<u8>>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
