use std::collections::BTreeMap;
use std::path::PathBuf;

use neurodyn_core::emg::extract_envelopes;
use serde::Serialize;

use super::Summary;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{self, Format};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Raw EMG trials
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "wide")]
    format: Format,
    /// Input sample rate in Hz (default: sidecar, else the configured fs_in_hz)
    #[arg(long)]
    sample_rate: Option<f64>,
    /// Channels to process, comma separated (default: all)
    #[arg(long, value_delimiter = ',')]
    channels: Vec<String>,
    /// Output length in samples
    #[arg(long)]
    clip_len: Option<usize>,
    /// Normalization percentile in (0, 100]
    #[arg(long)]
    percentile: Option<f64>,
    /// Envelope low-pass cutoff in Hz
    #[arg(long)]
    lp_hz: Option<f64>,
    /// Output prefix; writes <prefix>_envelopes.csv and <prefix>_summary.json
    #[arg(long, value_name = "PREFIX")]
    out: String,
}

#[derive(Serialize)]
struct Report {
    input: String,
    shape: [usize; 3],
    sample_rate_hz: f64,
    scales: BTreeMap<String, f64>,
}

pub fn run(args: Args, mut cfg: RunConfig) -> Result<(), CliError> {
    let env = &mut cfg.envelope;
    if let Some(v) = args.clip_len {
        env.clip_len = v;
    }
    if let Some(v) = args.percentile {
        env.norm_percentile = v;
    }
    if let Some(v) = args.lp_hz {
        env.lp_hz = v;
    }
    if let Some(v) = args.sample_rate {
        env.fs_in_hz = v;
    }
    let mut raw = io::load(&args.input, args.format, args.sample_rate, Some(cfg.envelope.fs_in_hz))?;
    if !args.channels.is_empty() {
        raw = raw.select_channels(&args.channels)?;
    }
    let out = extract_envelopes(&raw, &cfg.envelope)?;
    let env = &out.envelopes;
    io::save(env, &io::output_path(&args.out, "_envelopes.csv"))?;

    let (t, n, c) = env.shape();
    let report = Report {
        input: args.input.display().to_string(),
        shape: [t, n, c],
        sample_rate_hz: env.sample_rate_hz(),
        scales: env
            .channel_names()
            .into_iter()
            .map(String::from)
            .zip(out.scales.iter().copied())
            .collect(),
    };
    io::write_json(
        &io::output_path(&args.out, "_summary.json"),
        &Summary {
            command: "emg-process",
            result: report,
            config: &cfg,
        },
    )?;
    println!("envelopes: {t} trials x {n} samples x {c} channels at {} Hz", env.sample_rate_hz());
    Ok(())
}
