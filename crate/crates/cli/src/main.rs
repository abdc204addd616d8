//! `be`: reproducible runs of the Kolmogorov-distance bound evaluators.
//!
//! Exit codes: 0 success, 2 input error, 3 degenerate variance, 4 failed
//! identity check. `BE_WORKERS` sets the worker count.

mod chaos;
mod graph;
mod qform;
mod report;
mod ustat;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use report::CliError;

#[derive(Parser)]
#[command(
    name = "be",
    version,
    about = "Kolmogorov-distance bounds for functionals of independent variables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quadratic form of a symmetric matrix in i.i.d. coordinates.
    Qform(qform::QformArgs),
    /// Chaos identity suite on random canonical kernels.
    ChaosVerify(chaos::ChaosArgs),
    /// Degenerate weighted U-statistic.
    Ustat(ustat::UstatArgs),
    /// Weighted template copies in a random graph.
    Graph(graph::GraphArgs),
}

/// Flags shared by every subcommand.
#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Monte Carlo sample count; 0 skips the empirical part.
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    /// Confidence level parameter of the DKW band.
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Report path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Multiplies every constant-free rate; echoed in the report.
    #[arg(long)]
    pub constant: Option<f64>,
}

fn configure_workers() -> Result<(), CliError> {
    let Ok(v) = std::env::var("BE_WORKERS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::input(format!("BE_WORKERS must be a positive integer, got {v:?}"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::input(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_workers()?;
    match cli.command {
        Command::Qform(a) => qform::run(a),
        Command::ChaosVerify(a) => chaos::run(a),
        Command::Ustat(a) => ustat::run(a),
        Command::Graph(a) => graph::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
