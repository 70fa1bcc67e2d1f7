//! `neurodyn`: EMG envelopes, reward metrics, PCA and simplex forecasting
//! from the command line.

mod cmd;
mod config;
mod error;
mod io;
mod svg;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "neurodyn", version, about = "Neuromechanical time-series analysis toolkit")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores)
    #[arg(long, global = true, env = "NEURODYN_THREADS")]
    threads: Option<usize>,

    /// JSON run configuration; command-line flags take precedence over it
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract normalized EMG envelopes from raw EMG trials
    EmgProcess(cmd::emg::Args),
    /// Simplex-projection forecasting and (E, tau, Tp) search
    Edm(cmd::edm::Args),
    /// Per-timestep imitation reward, spectral and error metrics, or seed-sweep CIs
    RewardEval(cmd::reward::Args),
    /// Project activations onto their leading principal components
    Pca(cmd::pca::Args),
    /// Generate synthetic reaching trials from the 2-link arm model
    SynthGenerate(cmd::synth::Args),
    /// Inspect the run configuration
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Debug, Subcommand)]
enum ConfigAction {
    /// Print the effective configuration as JSON
    Show,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::invalid("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::invalid(format!("cannot start thread pool: {e}")))?;
    }
    let cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::EmgProcess(args) => cmd::emg::run(args, cfg),
        Command::Edm(args) => cmd::edm::run(args, cfg),
        Command::RewardEval(args) => cmd::reward::run(args, cfg),
        Command::Pca(args) => cmd::pca::run(args, cfg),
        Command::SynthGenerate(args) => cmd::synth::run(args, cfg),
        Command::Config {
            action: ConfigAction::Show,
        } => {
            let text = serde_json::to_string_pretty(&cfg).expect("config serializes");
            // a closed pipe (e.g. `| head`) is not an error worth reporting
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
