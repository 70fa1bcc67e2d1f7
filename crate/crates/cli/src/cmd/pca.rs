use std::path::PathBuf;

use neurodyn_core::pca::{project, LatentEmbedding};
use serde::Serialize;

use super::Summary;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{self, Format};
use crate::svg::{self, Panel, Series};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Activations as (clip, timestep, unit) trials
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "wide")]
    format: Format,
    #[arg(long)]
    sample_rate: Option<f64>,
    /// Channel excluded from the fit and appended to the embedding
    #[arg(long)]
    behavior: Option<String>,
    /// Number of components to keep
    #[arg(long)]
    n_components: Option<usize>,
    /// Output prefix; writes <prefix>_embedding.csv, <prefix>_variance.json and <prefix>_pca.svg
    #[arg(long, value_name = "PREFIX")]
    out: String,
}

#[derive(Serialize)]
struct Report {
    shape: [usize; 3],
    variance_ratio: Vec<f64>,
    total: f64,
    percentages: String,
}

fn pair_panels(emb: &LatentEmbedding) -> Vec<Panel> {
    let k = emb.data.n_channels();
    let pcs: Vec<Vec<f64>> = (0..k).map(|c| emb.data.channel_values(c)).collect();
    let mut panels = Vec::new();
    for a in 0..k.min(3) {
        for b in a + 1..k.min(3) {
            panels.push(Panel {
                title: format!("PC{} vs PC{}", a + 1, b + 1),
                x_label: format!("PC{}", a + 1),
                y_label: format!("PC{}", b + 1),
                series: vec![Series::scatter("", pcs[a].iter().copied().zip(pcs[b].iter().copied()).collect())],
            });
        }
    }
    if let Some((name, values)) = &emb.behavior {
        panels.push(Panel {
            title: format!("PC1 vs {name}"),
            x_label: "PC1".into(),
            y_label: name.clone(),
            series: vec![Series::scatter("", pcs[0].iter().copied().zip(values.iter().copied()).collect())],
        });
    }
    panels
}

pub fn run(args: Args, mut cfg: RunConfig) -> Result<(), CliError> {
    if let Some(n) = args.n_components {
        cfg.pca.n_components = n;
    }
    let acts = io::load(&args.input, args.format, args.sample_rate, Some(1.0))?;
    let emb = project(&acts, args.behavior.as_deref(), cfg.pca.n_components)?;
    let (clips, steps, k) = emb.data.shape();

    let mut header: Vec<String> = vec!["clip".into(), "timestep".into()];
    header.extend(emb.data.channel_names().into_iter().map(String::from));
    if let Some((name, _)) = &emb.behavior {
        header.push(name.clone());
    }
    let rows = (0..clips * steps).map(|i| {
        let (c, n) = (i / steps, i % steps);
        let mut row = vec![c.to_string(), n.to_string()];
        row.extend(emb.data.trial(c).row(n).iter().map(|v| v.to_string()));
        if let Some((_, values)) = &emb.behavior {
            row.push(values[i].to_string());
        }
        row
    });
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    io::write_text(&io::output_path(&args.out, "_embedding.csv"), &io::csv_text(&header, rows))?;
    io::write_text(&io::output_path(&args.out, "_pca.svg"), &svg::render(&pair_panels(&emb), 2))?;

    let report = emb.report();
    println!("variance explained: {}", emb.percentages());
    io::write_json(
        &io::output_path(&args.out, "_variance.json"),
        &Summary {
            command: "pca",
            result: Report {
                shape: [clips, steps, k],
                variance_ratio: report.variance_ratio,
                total: report.total,
                percentages: emb.percentages(),
            },
            config: &cfg,
        },
    )
}
