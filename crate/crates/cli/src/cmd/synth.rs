use neurodyn_core::arm::generate_reaches;
use serde::Serialize;

use super::Summary;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::io;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// RNG seed; trial i uses stream i of this seed
    #[arg(long)]
    seed: Option<u64>,
    /// Number of reaches
    #[arg(long)]
    trials: Option<usize>,
    /// Excitation noise and target jitter scale; 0 makes all trials identical
    #[arg(long)]
    noise: Option<f64>,
    /// Reach duration in seconds
    #[arg(long)]
    duration: Option<f64>,
    /// Output prefix; writes <prefix>_kinematics.csv, <prefix>_activations.csv and <prefix>_emg_raw.csv
    #[arg(long, value_name = "PREFIX")]
    out: String,
}

#[derive(Serialize)]
struct Report {
    trials: usize,
    samples_per_trial: usize,
    emg_samples_per_trial: usize,
    targets: Vec<[f64; 2]>,
}

pub fn run(args: Args, mut cfg: RunConfig) -> Result<(), CliError> {
    let script = &mut cfg.synth.script;
    if let Some(v) = args.seed {
        script.seed = v;
    }
    if let Some(v) = args.trials {
        script.trials = v;
    }
    if let Some(v) = args.noise {
        script.noise = v;
    }
    if let Some(v) = args.duration {
        script.duration = v;
    }
    let ds = generate_reaches(&cfg.synth.script, &cfg.synth.arm)?;
    io::save(&ds.kinematics, &io::output_path(&args.out, "_kinematics.csv"))?;
    io::save(&ds.activations, &io::output_path(&args.out, "_activations.csv"))?;
    io::save(&ds.raw_emg, &io::output_path(&args.out, "_emg_raw.csv"))?;
    let report = Report {
        trials: ds.kinematics.n_trials(),
        samples_per_trial: ds.kinematics.n_steps(),
        emg_samples_per_trial: ds.raw_emg.n_steps(),
        targets: ds.targets.clone(),
    };
    println!(
        "{} trials: {} samples at {} Hz, pseudo-EMG at {} Hz",
        report.trials,
        report.samples_per_trial,
        ds.kinematics.sample_rate_hz(),
        ds.raw_emg.sample_rate_hz()
    );
    io::write_json(
        &io::output_path(&args.out, "_summary.json"),
        &Summary {
            command: "synth-generate",
            result: report,
            config: &cfg,
        },
    )
}
