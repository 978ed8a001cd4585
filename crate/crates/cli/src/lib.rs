//! `lsd-lab` command-line front end.
//!
//! Exit codes: 0 ok, 1 threshold exceeded, 2 input error, 3 not a
//! spectral density, 4 solver failure, 5 simulation failure.

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod contour;
pub mod manifest;

pub const EXIT_OK: u8 = 0;
pub const EXIT_THRESHOLD: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_DENSITY: u8 = 3;
pub const EXIT_SOLVER: u8 = 4;
pub const EXIT_SIMULATION: u8 = 5;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "LSD_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "lsd-lab", version, about = "Limiting spectral distributions of correlated symmetric random matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the scaled spectral density of a model file.
    Density(DensityArgs),
    /// Solve the self-consistent equation along a contour.
    Solve(SolveArgs),
    /// Simulate an ensemble and tabulate its empirical spectrum.
    Simulate(SimulateArgs),
    /// Compare two distribution tables or two Stieltjes curves.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    /// Coefficient file.
    pub model: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Tabulate b(x, y) + b(y, x).
    #[arg(long)]
    pub symmetrize: bool,
    /// Covariance truncation radius for Volterra models.
    #[arg(long)]
    pub radius: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Density grid CSV.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    pub density: Option<PathBuf>,
    /// Coefficient file, tabulated on `--grid`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    /// Covariance truncation radius for Volterra models.
    #[arg(long)]
    pub radius: Option<usize>,
    /// `im=EPS,re=A:B:COUNT`; defaults to the comparison contour of the density.
    #[arg(long)]
    pub contour: Option<String>,
    /// Solver `key = value` file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Solve the scalar equation of a rank-one density.
    #[arg(long)]
    pub product_form: bool,
    /// Use b(x, y) + b(y, x), the density of the additive model.
    #[arg(long)]
    pub symmetrize: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Ensemble `key = value` file.
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// `im=EPS,re=A:B:COUNT`; defaults to the comparison contour of the model.
    #[arg(long)]
    pub contour: Option<String>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    /// Largest acceptable Kolmogorov distance.
    #[arg(long)]
    pub threshold_k: Option<f64>,
    /// Largest acceptable Lévy distance.
    #[arg(long)]
    pub threshold_levy: Option<f64>,
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn input(message: impl fmt::Display) -> Self {
        Self::new(EXIT_INPUT, message.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<lsd_lab::Error> for Failure {
    fn from(e: lsd_lab::Error) -> Self {
        use lsd_lab::Error;
        let code = match &e {
            Error::NotADensity { .. } => EXIT_DENSITY,
            Error::NoConvergence { .. } => EXIT_SOLVER,
            Error::NoConvergenceEig { .. } | Error::Replicate { .. } => EXIT_SIMULATION,
            Error::InvalidInput(_) | Error::Parse { .. } | Error::Io(_) => EXIT_INPUT,
        };
        Self::new(code, e.to_string())
    }
}

/// Caps the global rayon pool at `LSD_LAB_THREADS` when it is set.
pub fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::input(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // a pool built earlier in the same process keeps its size
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}

/// Runs one command, writing reports to stdout and diagnostics to stderr.
pub fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Density(args) => commands::density(&args),
        Command::Solve(args) => commands::solve(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Compare(args) => commands::compare(&args),
    }
}
