//! `quasidiff` command-line tool.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid pair, 3 inconclusive boundary
//! verdict, 4 failed oracle comparison.

mod cache;
mod commands;
mod output;

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use quasidiff::boundary::BoundaryError;
use quasidiff::config::ConfigError;
use quasidiff::harmonic::HarmonicError;
use quasidiff::kernel::{KernelError, Normalization};
use quasidiff::oracle::OracleError;
use quasidiff::simulate::SimError;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "quasidiff", version, about = "Resolvent kernels of generalized one-dimensional diffusions")]
pub struct Cli {
    /// Pair file (TOML).
    #[arg(long, global = true)]
    pub pair: Option<PathBuf>,
    /// Output directory; without it tables go to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Series and quadrature tolerance.
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub tol: f64,
    /// `paper` (c = 1) or `probabilistic` (c = fitted c_prob).
    #[arg(long, global = true, default_value = "paper")]
    pub normalization: Normalization,
    /// Cache directory (default `<out>/.cache`).
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub no_cache: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the pair and report its class.
    Validate {
        /// Print the canonical pair file instead of the report.
        #[arg(long)]
        canonical: bool,
    },
    /// Feller classification of both ends.
    Classify,
    /// Harmonic solutions and γ values.
    Solve {
        /// Comma-separated α values.
        #[arg(long, default_value = "1")]
        alpha: String,
        #[arg(long, default_value_t = 41)]
        grid: usize,
    },
    /// Kernel table on a state grid.
    Kernel {
        #[arg(long, default_value = "1")]
        alpha: String,
        /// continuous, split, modified, restricted or darned.
        #[arg(long)]
        regime: Option<String>,
        #[arg(long, default_value_t = 41)]
        grid: usize,
        /// csv or json.
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// `R_α f` at given states.
    Resolvent {
        #[arg(long, default_value = "1")]
        alpha: String,
        #[arg(long)]
        regime: Option<String>,
        /// `c` or `a..b=c0,c1,...;...`.
        #[arg(long, default_value = "1")]
        f: String,
        /// Comma-separated states; a trailing `-`/`+` selects a one-sided copy.
        #[arg(long, allow_hyphen_values = true)]
        points: Option<String>,
        #[arg(long, default_value_t = 21)]
        grid: usize,
    },
    /// Monte-Carlo estimate of the Laplace functional.
    Simulate {
        #[arg(long, allow_hyphen_values = true)]
        x0: f64,
        #[arg(long, default_value = "1")]
        f: String,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 30.0)]
        horizon: f64,
        /// chain, timechange or both (default: chain when atomic).
        #[arg(long)]
        sampler: Option<String>,
        /// Write the first N paths to `paths.csv`.
        #[arg(long, default_value_t = 0)]
        record: usize,
    },
    /// Series kernel against oracles; exit 4 on failure.
    Compare {
        #[arg(long, default_value = "0.5,1,2")]
        alpha: String,
        #[arg(long, default_value_t = 1e-6)]
        threshold: f64,
    },
    /// Fit the constant between the series kernel and chain resolvents.
    Calibrate {
        #[arg(long, default_value = "0.5,1,2")]
        alpha: String,
        #[arg(long, default_value_t = 1e-6)]
        agree: f64,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid pair: {0}")]
    Validation(String),
    #[error("inconclusive boundary verdict: {0}")]
    Inconclusive(String),
    #[error("oracle comparison failed: {0}")]
    Comparison(String),
    #[error("{0}")]
    Failed(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Failed(_) | CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Inconclusive(_) => 3,
            CliError::Comparison(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<BoundaryError> for CliError {
    fn from(e: BoundaryError) -> Self {
        CliError::Inconclusive(e.to_string())
    }
}

impl From<HarmonicError> for CliError {
    fn from(e: HarmonicError) -> Self {
        match e {
            HarmonicError::Boundary(b) => b.into(),
            HarmonicError::BadAlpha(_) | HarmonicError::BadTol(_) => CliError::Usage(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<KernelError> for CliError {
    fn from(e: KernelError) -> Self {
        match e {
            KernelError::Harmonic(h) => h.into(),
            KernelError::Pair(_) | KernelError::Regime { .. } => CliError::Validation(e.to_string()),
            KernelError::BadFunction(_) | KernelError::OutsideState { .. } => CliError::Usage(e.to_string()),
            KernelError::NonIntegrable => CliError::Usage(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Harmonic(h) => h.into(),
            OracleError::Pair(p) => CliError::Validation(p.to_string()),
            OracleError::Inconsistent { .. } => CliError::Comparison(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Oracle(o) => o.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
