use std::path::PathBuf;

use clap::ValueEnum;
use neurodyn_core::edm::{cross_predict, param_search, EmbeddingMode, ForecastResult, SearchTable, Split};
use serde::Serialize;

use super::Summary;
use crate::config::{IntRange, RunConfig};
use crate::error::CliError;
use crate::io::{self, Format};
use crate::svg::{self, Panel, Series};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Univariate,
    Multivariate,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    Loo,
    Half,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Input trial sets; channels of several files are placed side by side
    #[arg(long, value_name = "PATH", required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "wide")]
    format: Format,
    #[arg(long)]
    sample_rate: Option<f64>,
    /// Source channel(s), comma separated
    #[arg(long, value_delimiter = ',')]
    source: Vec<String>,
    /// Channel whose future values are predicted
    #[arg(long)]
    target: Option<String>,
    /// Embedding dimension
    #[arg(long = "E")]
    e: Option<usize>,
    /// Lag between embedding coordinates (negative looks into the past)
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<i64>,
    /// Prediction horizon in timesteps
    #[arg(long = "Tp")]
    tp: Option<usize>,
    /// Same-trial exclusion radius in timesteps
    #[arg(long)]
    theiler: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Library/query split: leave one trial out, or first half vs second half
    #[arg(long, value_enum)]
    split: Option<SplitArg>,
    /// Search the grid given by the range flags instead of a single forecast
    #[arg(long)]
    sweep: bool,
    /// Inclusive E range for --sweep, e.g. 1..6
    #[arg(long = "E-range", value_name = "A..B")]
    e_range: Option<IntRange>,
    /// Inclusive tau range for --sweep, e.g. -1..-4
    #[arg(long = "tau-range", value_name = "A..B", allow_hyphen_values = true)]
    tau_range: Option<IntRange>,
    /// Inclusive Tp range for --sweep, e.g. 1..10
    #[arg(long = "Tp-range", value_name = "A..B")]
    tp_range: Option<IntRange>,
    /// Output prefix
    #[arg(long, value_name = "PREFIX")]
    out: String,
}

#[derive(Serialize)]
struct ForecastReport {
    rho: f64,
    #[serde(rename = "E")]
    e: usize,
    tau: i64,
    #[serde(rename = "Tp")]
    tp: usize,
    n_pred: usize,
}

impl ForecastReport {
    fn from(r: &ForecastResult) -> Self {
        Self {
            rho: r.rho,
            e: r.config.e,
            tau: r.config.tau,
            tp: r.config.tp,
            n_pred: r.predictions.len(),
        }
    }
}

#[derive(Serialize)]
struct SweepReport {
    n_rows: usize,
    best: ForecastReport,
}

fn apply_flags(args: &Args, cfg: &mut RunConfig) {
    let edm = &mut cfg.edm;
    let emb = &mut edm.embedding;
    if !args.source.is_empty() {
        emb.columns = args.source.clone();
    }
    if let Some(t) = &args.target {
        emb.target = t.clone();
    }
    if let Some(m) = args.mode {
        emb.mode = match m {
            ModeArg::Univariate => EmbeddingMode::UnivariateDelay,
            ModeArg::Multivariate => EmbeddingMode::MultivariateDirect,
        };
    }
    if emb.mode == EmbeddingMode::MultivariateDirect && args.e.is_none() {
        emb.e = emb.columns.len();
    }
    if let Some(v) = args.e {
        emb.e = v;
    }
    if let Some(v) = args.tau {
        emb.tau = v;
    }
    if let Some(v) = args.tp {
        emb.tp = v;
    }
    if let Some(v) = args.theiler {
        emb.theiler = v;
    }
    if let Some(s) = args.split {
        edm.split = match s {
            SplitArg::Loo => Split::LeaveOneTrialOut,
            SplitArg::Half => Split::HalfSplit,
        };
    }
    if args.e_range.is_some() {
        edm.e_range = args.e_range;
    }
    if args.tau_range.is_some() {
        edm.tau_range = args.tau_range;
    }
    if args.tp_range.is_some() {
        edm.tp_range = args.tp_range;
    }
}

fn counts(r: IntRange, name: &str) -> Result<Vec<usize>, CliError> {
    r.values()
        .into_iter()
        .map(|v| usize::try_from(v).map_err(|_| CliError::invalid(format!("{name} values must be >= 0, got {v}"))))
        .collect()
}

fn write_forecast(prefix: &str, r: &ForecastResult) -> Result<(), CliError> {
    let rows = r.predictions.iter().map(|p| {
        vec![
            p.origin.trial.to_string(),
            p.origin.timestep.to_string(),
            p.observed.to_string(),
            p.predicted.to_string(),
        ]
    });
    io::write_text(
        &io::output_path(prefix, "_forecast.csv"),
        &io::csv_text(&["trial", "timestep", "observed", "predicted"], rows),
    )
}

fn forecast_panels(r: &ForecastResult) -> Vec<Panel> {
    let mut trials: Vec<usize> = r.predictions.iter().map(|p| p.origin.trial).collect();
    trials.dedup();
    let target = &r.config.target;
    let mut panels: Vec<Panel> = trials
        .iter()
        .take(4)
        .map(|&t| {
            let preds: Vec<_> = r.predictions.iter().filter(|p| p.origin.trial == t).collect();
            let at = |p: &&neurodyn_core::edm::Prediction| (p.origin.timestep + r.config.tp) as f64;
            Panel {
                title: format!("trial {t}"),
                x_label: "timestep".into(),
                y_label: target.clone(),
                series: vec![
                    Series::line("observed", preds.iter().map(|p| (at(p), p.observed)).collect()),
                    Series::line("predicted", preds.iter().map(|p| (at(p), p.predicted)).collect()),
                ],
            }
        })
        .collect();
    panels.push(Panel {
        title: format!("rho = {:.3}", r.rho),
        x_label: "observed".into(),
        y_label: "predicted".into(),
        series: vec![Series::scatter(
            "",
            r.predictions.iter().map(|p| (p.observed, p.predicted)).collect(),
        )],
    });
    panels
}

fn sweep_panels(table: &SearchTable) -> Vec<Panel> {
    let best = table.best_row();
    let by_tp = table
        .rows
        .iter()
        .filter(|r| r.tau == best.tau)
        .fold(Vec::<(usize, Vec<(f64, f64)>)>::new(), |mut acc, r| {
            match acc.iter_mut().find(|(e, _)| *e == r.e) {
                Some((_, pts)) => pts.push((r.tp as f64, r.rho)),
                None => acc.push((r.e, vec![(r.tp as f64, r.rho)])),
            }
            acc
        });
    let by_e = table
        .rows
        .iter()
        .filter(|r| r.tp == best.tp)
        .fold(Vec::<(i64, Vec<(f64, f64)>)>::new(), |mut acc, r| {
            match acc.iter_mut().find(|(t, _)| *t == r.tau) {
                Some((_, pts)) => pts.push((r.e as f64, r.rho)),
                None => acc.push((r.tau, vec![(r.e as f64, r.rho)])),
            }
            acc
        });
    vec![
        Panel {
            title: format!("tau = {}", best.tau),
            x_label: "Tp".into(),
            y_label: "simplex rho".into(),
            series: by_tp.into_iter().map(|(e, pts)| Series::line(format!("E={e}"), pts)).collect(),
        },
        Panel {
            title: format!("Tp = {}", best.tp),
            x_label: "E".into(),
            y_label: "simplex rho".into(),
            series: by_e.into_iter().map(|(t, pts)| Series::line(format!("tau={t}"), pts)).collect(),
        },
    ]
}

pub fn run(args: Args, mut cfg: RunConfig) -> Result<(), CliError> {
    apply_flags(&args, &mut cfg);
    let set = io::load_joined(&args.input, args.format, args.sample_rate, Some(1.0))?;
    let edm = cfg.edm.clone();
    let sweep = args.sweep || edm.e_range.is_some() || edm.tau_range.is_some() || edm.tp_range.is_some();

    if !sweep {
        let r = cross_predict(&set, &edm.embedding, edm.split)?;
        write_forecast(&args.out, &r)?;
        io::write_text(
            &io::output_path(&args.out, "_forecast.svg"),
            &svg::render(&forecast_panels(&r), 3),
        )?;
        let report = ForecastReport::from(&r);
        println!(
            "rho = {:.4} (E={}, tau={}, Tp={}, {} predictions)",
            report.rho, report.e, report.tau, report.tp, report.n_pred
        );
        return io::write_json(
            &io::output_path(&args.out, "_summary.json"),
            &Summary {
                command: "edm",
                result: report,
                config: &cfg,
            },
        );
    }

    let emb = &edm.embedding;
    let single = |v: i64| IntRange { start: v, end: v };
    let e_range = counts(edm.e_range.unwrap_or(single(emb.e as i64)), "E")?;
    let tau_range = edm.tau_range.unwrap_or(single(emb.tau)).values();
    let tp_range = counts(edm.tp_range.unwrap_or(single(emb.tp as i64)), "Tp")?;
    let table = param_search(&set, emb, &e_range, &tau_range, &tp_range, edm.split)?;

    let rows = table.rows.iter().enumerate().map(|(i, r)| {
        vec![
            r.e.to_string(),
            r.tau.to_string(),
            r.tp.to_string(),
            r.rho.to_string(),
            r.n_pred.to_string(),
            u8::from(i == table.best).to_string(),
        ]
    });
    io::write_text(
        &io::output_path(&args.out, "_grid.csv"),
        &io::csv_text(&["E", "tau", "Tp", "rho", "n_pred", "best"], rows),
    )?;
    io::write_text(&io::output_path(&args.out, "_grid.svg"), &svg::render(&sweep_panels(&table), 2))?;

    let b = *table.best_row();
    let best_cfg = neurodyn_core::edm::EmbeddingConfig {
        e: b.e,
        tau: b.tau,
        tp: b.tp,
        ..emb.clone()
    };
    let best = cross_predict(&set, &best_cfg, edm.split)?;
    write_forecast(&args.out, &best)?;
    io::write_text(
        &io::output_path(&args.out, "_forecast.svg"),
        &svg::render(&forecast_panels(&best), 3),
    )?;
    println!(
        "{} grid points; best rho = {:.4} at E={}, tau={}, Tp={}",
        table.rows.len(),
        b.rho,
        b.e,
        b.tau,
        b.tp
    );
    io::write_json(
        &io::output_path(&args.out, "_summary.json"),
        &Summary {
            command: "edm",
            result: SweepReport {
                n_rows: table.rows.len(),
                best: ForecastReport::from(&best),
            },
            config: &cfg,
        },
    )
}
