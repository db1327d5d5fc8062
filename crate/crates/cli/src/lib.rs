//! Command-line driver for `mrho`.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 numerical failure
//! (every orbit escaped, quadrature did not converge, divergence check
//! failed).

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{load_config_file, Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "mrho", version, about = "Weighted partial integrability of Jacobi-multiplier flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Flat TOML file whose keys are the long flag names
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Estimate m_rho on the initial-condition grid
    Compute,
    /// m_rho for each value in --alphas
    Sweep,
    /// Sensitivity of m_rho to t-max, dt and grid refinement
    Converge,
    /// Trajectories of the benchmark for several alpha values
    Trajectory,
    /// First-order Poincare map against direct integration
    Poincare,
    /// Twist, resonance, Fourier and non-persistence diagnostics
    Diagnose,
    /// Check div(rho V) = 0 on random samples
    VerifyDivergence,
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn config(e: impl Into<anyhow::Error>) -> Self {
        Self { code: 1, error: e.into() }
    }

    pub fn numerical(e: impl Into<anyhow::Error>) -> Self {
        Self { code: 2, error: e.into() }
    }

    pub fn core(e: mrho_core::error::Error) -> Self {
        match e {
            mrho_core::error::Error::QuadratureNonConvergence { .. } => Self::numerical(e),
            other => Self::config(other),
        }
    }
}

pub fn resolve(cli: &Cli) -> Result<RunConfig, Failure> {
    let file = cli.config.as_deref().map(load_config_file).transpose().map_err(Failure::config)?;
    RunConfig::resolve(file.as_ref(), &cli.overrides).map_err(Failure::config)
}

pub fn execute(command: Command, cfg: &RunConfig) -> Result<(), Failure> {
    match command {
        Command::Compute => commands::compute(cfg),
        Command::Sweep => commands::sweep(cfg),
        Command::Converge => commands::converge(cfg),
        Command::Trajectory => commands::trajectory(cfg),
        Command::Poincare => commands::poincare(cfg),
        Command::Diagnose => commands::diagnose(cfg),
        Command::VerifyDivergence => commands::verify_divergence(cfg),
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match resolve(&cli).and_then(|cfg| execute(cli.command, &cfg)) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}
