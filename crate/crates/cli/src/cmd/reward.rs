use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use neurodyn_core::reward::{
    aggregate_sweep, effective_band, high_freq_power, mae_channels, total_reward, RewardTrace,
    RewardWeights, SweepPoint,
};
use neurodyn_core::{ChannelKind, TrialSet};
use serde::Serialize;

use super::Summary;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{self, Format};
use crate::svg::{self, Panel, Series};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    JointOnly,
    PhysicsAware,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Rollout trials holding joint angles, actions and optionally velocities/forces;
    /// channels of several files are placed side by side
    #[arg(long, value_name = "PATH", num_args = 1.., required_unless_present = "seeds", conflicts_with = "seeds")]
    rollout: Vec<PathBuf>,
    /// Reference trials with the same joint-angle channel names
    #[arg(long, value_name = "PATH", requires = "rollout")]
    reference: Option<PathBuf>,
    /// Per-seed results (columns param,seed,value) to aggregate into confidence intervals
    #[arg(long, value_name = "PATH")]
    seeds: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "wide")]
    format: Format,
    #[arg(long)]
    sample_rate: Option<f64>,
    /// Joint-angle channels (default: channels of kind joint_angle)
    #[arg(long, value_delimiter = ',')]
    joints: Vec<String>,
    /// Action channels (default: channels of kind muscle_activation)
    #[arg(long, value_delimiter = ',')]
    actions: Vec<String>,
    /// Joint-velocity channels for the energy term (default: kind joint_velocity)
    #[arg(long, value_delimiter = ',')]
    velocities: Vec<String>,
    /// Actuator-force channels paired with --velocities; without them the energy term is 0
    #[arg(long, value_delimiter = ',')]
    forces: Vec<String>,
    /// Weight preset applied before individual overrides
    #[arg(long, value_enum)]
    weights: Option<Preset>,
    #[arg(long)]
    lambda_joint: Option<f64>,
    #[arg(long)]
    lambda_ctrl: Option<f64>,
    #[arg(long)]
    lambda_energy: Option<f64>,
    #[arg(long)]
    alpha_joint: Option<f64>,
    /// Frequency band (Hz) of the spectral metric; the upper edge is clamped to Nyquist
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [10.0, 1000.0])]
    band: Vec<f64>,
    /// EMG envelopes compared against activations for the MAE metric
    #[arg(long, value_name = "PATH")]
    emg: Option<PathBuf>,
    /// Envelope-to-activation channel pairs, e.g. emg_biceps:a_biceps
    #[arg(long, value_delimiter = ',')]
    pairs: Vec<String>,
    /// Output prefix
    #[arg(long, value_name = "PREFIX")]
    out: String,
}

#[derive(Serialize)]
struct EvalReport {
    n_steps: usize,
    mean_r_total: f64,
    hf_power: f64,
    hf_power_per_channel: BTreeMap<String, f64>,
    hf_band_hz: [f64; 2],
    mae: Option<f64>,
    mae_per_pair: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct SweepReport {
    points: Vec<SweepPoint>,
}

fn apply_flags(args: &Args, w: &mut RewardWeights) {
    match args.weights {
        Some(Preset::JointOnly) => *w = RewardWeights::joint_only(),
        Some(Preset::PhysicsAware) => *w = RewardWeights::physics_aware(),
        None => {}
    }
    if let Some(v) = args.lambda_joint {
        w.lambda_joint = v;
    }
    if let Some(v) = args.lambda_ctrl {
        w.lambda_ctrl = v;
    }
    if let Some(v) = args.lambda_energy {
        w.lambda_energy = v;
    }
    if let Some(v) = args.alpha_joint {
        w.alpha_joint = v;
    }
}

fn channels_or_kind(set: &TrialSet, given: &[String], kind: ChannelKind) -> Vec<String> {
    if !given.is_empty() {
        return given.to_vec();
    }
    set.channels()
        .iter()
        .filter(|c| c.kind == kind)
        .map(|c| c.name.clone())
        .collect()
}

fn indices(set: &TrialSet, names: &[String]) -> Result<Vec<usize>, CliError> {
    names.iter().map(|n| Ok(set.channel_index(n)?)).collect()
}

fn default_pairs(emg: &TrialSet, acts: &TrialSet) -> Vec<(String, String)> {
    // emg_<muscle> pairs with a_<muscle> when both exist
    emg.channel_names()
        .into_iter()
        .filter_map(|e| {
            let muscle = e.strip_prefix("emg_")?;
            let a = format!("a_{muscle}");
            acts.channel_index(&a).ok().map(|_| (e.to_string(), a))
        })
        .collect()
}

fn evaluate(args: &Args, cfg: &RunConfig, rollout_paths: &[PathBuf]) -> Result<(), CliError> {
    let w = cfg.reward;
    w.validate()?;
    let rollout = io::load_joined(rollout_paths, args.format, args.sample_rate, None)?;
    let joints = channels_or_kind(&rollout, &args.joints, ChannelKind::JointAngle);
    let actions = channels_or_kind(&rollout, &args.actions, ChannelKind::MuscleActivation);
    if joints.is_empty() {
        return Err(CliError::invalid("no joint-angle channels; pass --joints"));
    }
    if actions.is_empty() {
        return Err(CliError::invalid("no action channels; pass --actions"));
    }
    let (velocities, forces) = if args.forces.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        let v = channels_or_kind(&rollout, &args.velocities, ChannelKind::JointVelocity);
        if v.len() != args.forces.len() {
            return Err(CliError::invalid(format!(
                "{} velocity channels but {} force channels",
                v.len(),
                args.forces.len()
            )));
        }
        (v, args.forces.clone())
    };
    let reference = match &args.reference {
        Some(p) => io::load(p, args.format, args.sample_rate, Some(rollout.sample_rate_hz()))?,
        None => rollout.clone(),
    };
    if (reference.n_trials(), reference.n_steps()) != (rollout.n_trials(), rollout.n_steps()) {
        return Err(CliError::invalid(format!(
            "reference has {}x{} trials x steps, rollout has {}x{}",
            reference.n_trials(),
            reference.n_steps(),
            rollout.n_trials(),
            rollout.n_steps()
        )));
    }

    let (qi, ri) = (indices(&rollout, &joints)?, indices(&reference, &joints)?);
    let (ai, vi, fi) = (
        indices(&rollout, &actions)?,
        indices(&rollout, &velocities)?,
        indices(&rollout, &forces)?,
    );
    let pick = |row: &[f64], idx: &[usize]| idx.iter().map(|&i| row[i]).collect::<Vec<f64>>();
    let mut trace = RewardTrace::default();
    let mut rows = Vec::with_capacity(rollout.n_trials() * rollout.n_steps());
    for t in 0..rollout.n_trials() {
        let (roll, refr) = (rollout.trial(t), reference.trial(t));
        for n in 0..rollout.n_steps() {
            let row = roll.row(n);
            let e = total_reward(
                &pick(row, &qi),
                &pick(refr.row(n), &ri),
                &pick(row, &ai),
                &pick(row, &vi),
                &pick(row, &fi),
                &w,
            )?;
            rows.push(vec![
                t.to_string(),
                n.to_string(),
                e.r_joint.to_string(),
                e.c_ctrl.to_string(),
                e.c_energy.to_string(),
                e.r_total.to_string(),
            ]);
            trace.push(e);
        }
    }
    io::write_text(
        &io::output_path(&args.out, "_reward.csv"),
        &io::csv_text(&["trial", "timestep", "r_joint", "c_ctrl", "c_energy", "r_total"], rows),
    )?;

    let fs = rollout.sample_rate_hz();
    let band = (args.band[0], args.band[1]);
    let (lo, hi, clamped) = effective_band(fs, band)?;
    if clamped {
        eprintln!("notice: band upper edge {} Hz clamped to Nyquist {hi} Hz", band.1);
    }
    let mut hf_per_channel = BTreeMap::new();
    for (name, &c) in actions.iter().zip(&ai) {
        let mut sum = 0.0;
        for t in 0..rollout.n_trials() {
            sum += high_freq_power(&rollout.series(t, c), fs, band)?;
        }
        hf_per_channel.insert(name.clone(), sum / rollout.n_trials().max(1) as f64);
    }
    let hf_power = hf_per_channel.values().sum::<f64>() / hf_per_channel.len() as f64;

    let mut mae_per_pair = BTreeMap::new();
    if let Some(p) = &args.emg {
        let emg = io::load(p, args.format, None, Some(fs))?;
        let pairs = if args.pairs.is_empty() {
            default_pairs(&emg, &rollout)
        } else {
            args.pairs
                .iter()
                .map(|s| {
                    s.split_once(':')
                        .map(|(a, b)| (a.to_string(), b.to_string()))
                        .ok_or_else(|| CliError::invalid(format!("pair `{s}` must look like emg:activation")))
                })
                .collect::<Result<_, _>>()?
        };
        if pairs.is_empty() {
            return Err(CliError::invalid("no envelope/activation pairs; pass --pairs"));
        }
        for (e, a) in pairs {
            let v = mae_channels(&emg, &e, &rollout, &a)?;
            mae_per_pair.insert(format!("{e}:{a}"), v);
        }
    }
    let mae = (!mae_per_pair.is_empty()).then(|| mae_per_pair.values().sum::<f64>() / mae_per_pair.len() as f64);

    let report = EvalReport {
        n_steps: trace.len(),
        mean_r_total: trace.mean_total().unwrap_or(0.0),
        hf_power,
        hf_power_per_channel: hf_per_channel,
        hf_band_hz: [lo, hi],
        mae,
        mae_per_pair,
    };
    println!(
        "mean r_total = {:.6}, hf_power = {:.4}{}",
        report.mean_r_total,
        report.hf_power,
        report.mae.map(|m| format!(", mae = {m:.4}")).unwrap_or_default()
    );
    io::write_json(
        &io::output_path(&args.out, "_summary.json"),
        &Summary {
            command: "reward-eval",
            result: report,
            config: cfg,
        },
    )
}

fn read_seeds(path: &Path) -> Result<Vec<(f64, Vec<f64>)>, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::invalid(format!("{}: missing column `{name}`", path.display())))
    };
    let (pi, vi) = (col("param")?, col("value")?);
    col("seed")?;
    let mut groups: Vec<(f64, Vec<f64>)> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
        let num = |i: usize| {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::invalid(format!("{}: bad number on data line {}", path.display(), line + 1)))
        };
        let (p, v) = (num(pi)?, num(vi)?);
        match groups.iter_mut().find(|(q, _)| *q == p) {
            Some((_, vals)) => vals.push(v),
            None => groups.push((p, vec![v])),
        }
    }
    Ok(groups)
}

fn sweep(args: &Args, cfg: &RunConfig, path: &Path) -> Result<(), CliError> {
    if !path.exists() {
        return Err(CliError::io(format!("{}: no such file", path.display())));
    }
    let points = aggregate_sweep(&read_seeds(path)?)?;
    let rows = points.iter().map(|p| {
        vec![
            p.param_value.to_string(),
            p.mean.to_string(),
            p.ci95_lo.to_string(),
            p.ci95_hi.to_string(),
            p.per_seed_values.len().to_string(),
        ]
    });
    io::write_text(
        &io::output_path(&args.out, "_sweep.csv"),
        &io::csv_text(&["param", "mean", "ci_lo", "ci_hi", "n"], rows),
    )?;
    let panel = Panel {
        title: "mean with 95% CI".into(),
        x_label: "param".into(),
        y_label: "value".into(),
        series: vec![
            Series::line("mean", points.iter().map(|p| (p.param_value, p.mean)).collect()),
            Series::line("ci_lo", points.iter().map(|p| (p.param_value, p.ci95_lo)).collect()),
            Series::line("ci_hi", points.iter().map(|p| (p.param_value, p.ci95_hi)).collect()),
        ],
    };
    io::write_text(&io::output_path(&args.out, "_sweep.svg"), &svg::render(&[panel], 1))?;
    println!("{} parameter values aggregated", points.len());
    io::write_json(
        &io::output_path(&args.out, "_summary.json"),
        &Summary {
            command: "reward-eval",
            result: SweepReport { points },
            config: cfg,
        },
    )
}

pub fn run(args: Args, mut cfg: RunConfig) -> Result<(), CliError> {
    apply_flags(&args, &mut cfg.reward);
    match &args.seeds {
        Some(p) => sweep(&args, &cfg, p),
        None if !args.rollout.is_empty() => evaluate(&args, &cfg, &args.rollout),
        None => Err(CliError::invalid("pass --rollout or --seeds")),
    }
}
