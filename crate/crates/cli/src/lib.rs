//! Command-line front end: JSON configs in, CSV/JSON/binary files and a
//! run manifest out.
//!
//! Exit codes: 0 success, 1 domain-level failure (failed condition check,
//! degenerate or unavailable bound, coverage or numerical error), 2 usage
//! or configuration error.

pub mod commands;
pub mod config;
pub mod manifest;

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

/// Default output directory when neither `--out` nor `IRFCORR_OUT` is set.
pub const DEFAULT_OUT: &str = "irfcorr-out";

#[derive(Debug, Parser)]
#[command(name = "irfcorr", version, about = "Cross-correlogram estimation of impulse responses driven by white noise")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "IRFCORR_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads for replication loops. Outputs do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Also write simulated paths and per-replication trajectories.
    #[arg(long, global = true)]
    pub emit_paths: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check conditions on a kernel family over a Δ ladder.
    CheckKernel,
    /// Simulate X_Δ (and optionally Y) paths for a Δ ladder.
    Simulate,
    /// Run one replication and estimate H on a τ grid.
    Estimate,
    /// Evaluate tail bounds on an x grid.
    Bounds,
    /// Run the replication harness.
    Montecarlo,
}

impl Command {
    /// Section name in the config file.
    pub fn key(self) -> &'static str {
        match self {
            Command::CheckKernel => "check_kernel",
            Command::Simulate => "simulate",
            Command::Estimate => "estimate",
            Command::Bounds => "bounds",
            Command::Montecarlo => "montecarlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Self::domain(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<irfcorr::Error> for CliError {
    fn from(e: irfcorr::Error) -> Self {
        use irfcorr::Error::*;
        match e {
            InvalidParameter(_) | InvalidInput(_) => Self::usage(e.to_string()),
            _ => Self::domain(e.to_string()),
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::usage("--config is required"))?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(CliError::usage("--workers must be at least 1"));
    }
    let effective = config::load(path, cli.command.key())?;
    let ctx = commands::Context {
        out,
        workers,
        emit_paths: cli.emit_paths,
    };
    commands::dispatch(cli.command, &effective, &ctx)
}
