//! Command-line driver: reads a JSON config, runs one analysis and writes its reports.
//!
//! Exit codes: 0 on success, 1 on I/O failure, 2 when the config or the system it
//! describes is invalid, 3 when the numerics fail to converge.

pub mod builtins;
pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use gfloquet::FloquetError;

#[derive(Debug, Parser)]
#[command(name = "gfloquet", version, about = "Floquet spectra, limit-cycle stability and Bloch bands")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Multipliers, periodic modes and verification residuals of a linear periodic system.
    Analyze(Options),
    /// Stability verdict for a limit cycle of a nonlinear system.
    Stability(Options),
    /// Propagating Bloch wavevectors over a range of energies.
    Bands(Options),
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// JSON config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Samples per period, overriding the config.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Main tolerance of the command, overriding the config: the spectrum match tolerance
    /// for `analyze`, the unit-circle tolerance for `stability` and `bands`.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Worker threads; all cores by default.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Analysis(#[from] FloquetError),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Analysis(e) => match e {
                FloquetError::InvalidGrid(_)
                | FloquetError::InvalidSystem { .. }
                | FloquetError::InvalidArgument(_)
                | FloquetError::SegmentLength { .. }
                | FloquetError::SpanNotMultiple { .. }
                | FloquetError::DelayNotResolved { .. }
                | FloquetError::DelayBeyondMemory { .. }
                | FloquetError::NonTruncatable { .. }
                | FloquetError::CycleNotClosed { .. } => 2,
                FloquetError::Eigensolver(_)
                | FloquetError::NoConvergedMultipliers { .. }
                | FloquetError::NotAnEigenvalue { .. }
                | FloquetError::EmptySpectrum
                | FloquetError::NonConvergent { .. }
                | FloquetError::Singular(_) => 3,
            },
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let (opts, run): (&Options, fn(&str, &Options) -> Result<i32, CliError>) = match &cli.command {
        Command::Analyze(o) => (o, commands::analyze),
        Command::Stability(o) => (o, commands::stability),
        Command::Bands(o) => (o, commands::bands),
    };
    if opts.jobs == Some(0) {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    if let Some(t) = opts.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(CliError::Config(format!("--tol must be positive, got {t}")));
        }
    }
    let bytes = std::fs::read(&opts.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", opts.config.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| CliError::Config(format!("{} is not UTF-8: {e}", opts.config.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {:?} worker threads: {e}", opts.jobs)))?;
    pool.install(|| run(text, opts))
}

/// Runs one command and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("gfloquet: {e}");
            e.exit_code()
        }
    }
}
