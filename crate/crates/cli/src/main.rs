//! `rild` experiment runner.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical
//! failure (divergence or eigensolver breakdown; partial results are kept).

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::config::Overrides;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Io(_) => 1,
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl From<rild::Error> for CliError {
    fn from(e: rild::Error) -> Self {
        use rild::Error as E;
        match e {
            E::Config(_) | E::Shape(_) | E::NotPositiveDefinite(_) => Self::Config(e.to_string()),
            other => Self::Numerical(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "rild",
    version,
    about = "Run reweighted Langevin experiments from TOML configs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment description (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Master seed; overrides `algorithm.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Comma-separated iterations to dump ensembles at; overrides `algorithm.snapshot_iters`.
    #[arg(long, global = true, value_delimiter = ',')]
    snapshot_iters: Option<Vec<usize>>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run one algorithm and write trace.csv, ensemble snapshots and meta.json.
    Run,
    /// Pass-rate grid over (tau, sigma); writes passrate.csv.
    Sweep,
    /// Spectral gap and concentration curves of the 1-d operators.
    Spectral,
}

fn execute(cli: &Cli) -> Result<commands::Report, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let overrides = Overrides {
        out: cli.out.clone(),
        seed: cli.seed,
        snapshot_iters: cli.snapshot_iters.clone(),
    };
    let file = config::load(path, &overrides)?;
    match cli.command {
        Command::Run => commands::run(&file),
        Command::Sweep => commands::sweep(&file),
        Command::Spectral => commands::spectral(&file),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(report) => {
            println!("{}", report.message);
            match report.failure {
                Some(err) => {
                    eprintln!("rild: {err}");
                    ExitCode::from(err.exit_code())
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(err) => {
            eprintln!("rild: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
