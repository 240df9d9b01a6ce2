mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Batch experiment runner: drift, entropy and boundary-dimension studies
/// for random walks on hyperbolic group models.
#[derive(Parser)]
#[command(name = "hmdim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Drift,
    Entropy,
    Dimension,
    VerifyFormula,
    Oracle,
    Diagnostics,
    Continuity,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (falls back to HMDIM_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo drift, plus the exact table route on free-group models.
    Drift(RunArgs),
    /// Entropy by sparse convolution, Shannon Monte Carlo and, on
    /// nearest-neighbor free-group models, the exact boundary formula.
    Entropy(RunArgs),
    /// Boundary cloud sampling and local-dimension regression.
    Dimension(RunArgs),
    /// The full pipeline: drift, entropy routes, dimension, and the
    /// dimension-formula cross-checks.
    VerifyFormula(RunArgs),
    /// Exact free-group oracle: first passage, harmonic measure, drift,
    /// entropy.
    Oracle(RunArgs),
    /// Tracking, equipartition-event, shadow-hitting and stationarity
    /// diagnostics (free-group models).
    Diagnostics(RunArgs),
    /// Dimension continuity under shrinking perturbations of the measure.
    Continuity(RunArgs),
    /// Rewrites a completed dimension run's artifacts as plot-ready CSVs.
    Plotdata {
        /// Directory holding a completed run.
        #[arg(long)]
        results: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Drift(a) => (Kind::Drift, a),
        Command::Entropy(a) => (Kind::Entropy, a),
        Command::Dimension(a) => (Kind::Dimension, a),
        Command::VerifyFormula(a) => (Kind::VerifyFormula, a),
        Command::Oracle(a) => (Kind::Oracle, a),
        Command::Diagnostics(a) => (Kind::Diagnostics, a),
        Command::Continuity(a) => (Kind::Continuity, a),
        Command::Plotdata { results } => {
            return match output::emit_plotdata(&results) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            };
        }
    };
    match run::run(kind, &args) {
        Ok(run::Outcome::Clean) => ExitCode::SUCCESS,
        Ok(run::Outcome::ChecksFailed(failed)) => {
            eprintln!("consistency checks failed: {}", failed.join(", "));
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
