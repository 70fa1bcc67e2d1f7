//! File helpers shared by the subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use neurodyn_core::trial_data::{load_trialset, save_trialset, sidecar_path};
use neurodyn_core::{CsvFormat, TrialSet};
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Wide,
    Long,
}

impl From<Format> for CsvFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Wide => CsvFormat::CsvWide,
            Format::Long => CsvFormat::CsvLong,
        }
    }
}

/// Loads a trial set. The sample rate comes from the flag, else the sidecar,
/// else `fallback`.
pub fn load(
    path: &Path,
    format: Format,
    rate_flag: Option<f64>,
    fallback: Option<f64>,
) -> Result<TrialSet, CliError> {
    if !path.exists() {
        return Err(CliError::io(format!("{}: no such file", path.display())));
    }
    let rate = rate_flag.or_else(|| {
        if sidecar_path(path).exists() {
            None
        } else {
            fallback
        }
    });
    Ok(load_trialset(path, format.into(), rate)?)
}

/// Loads several trial sets with identical trial layout and places their
/// channels side by side.
pub fn load_joined(
    paths: &[PathBuf],
    format: Format,
    rate_flag: Option<f64>,
    fallback: Option<f64>,
) -> Result<TrialSet, CliError> {
    let mut sets = paths.iter().map(|p| load(p, format, rate_flag, fallback));
    let mut set = sets
        .next()
        .ok_or_else(|| CliError::invalid("no input files"))??;
    for next in sets {
        set = set.concat_channels(&next?)?;
    }
    Ok(set)
}

pub fn output_path(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}{suffix}"))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("summary serializes");
    text.push('\n');
    write_text(path, &text)
}

pub fn save(set: &TrialSet, path: &Path) -> Result<(), CliError> {
    Ok(save_trialset(set, path, CsvFormat::CsvWide)?)
}

/// CSV text from a header and rows of already formatted cells.
pub fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}
