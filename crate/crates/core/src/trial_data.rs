//! Trial-aligned multichannel time series and their CSV interchange formats.
//!
//! A [`TrialSet`] is a dense `(trial, timestep, channel)` block of `f64`
//! values sharing one sample rate. Two CSV layouts are supported:
//!
//! * `csv_wide`: `trial,timestep,<ch1>,...,<chC>`, one row per timestep.
//! * `csv_long`: `trial,timestep,channel,value`, one row per cell.
//!
//! Channel kinds, units and the sample rate do not fit in either layout and
//! travel in a JSON sidecar next to the CSV (`<file>.meta.json`). Without a
//! sidecar the loader needs the sample rate from the caller and marks every
//! channel as [`ChannelKind::Other`].
//!
//! Values are written with Rust's shortest round-trip float formatting, so
//! `load(save(x)) == x` holds bit-for-bit for finite data.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrialDataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("ragged trials: trial {trial} has {found} timesteps, expected {expected}")]
    RaggedTrials {
        trial: i64,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value at trial {trial}, timestep {timestep}, channel `{channel}`")]
    NonFiniteValue {
        trial: i64,
        timestep: usize,
        channel: String,
    },
    #[error("duplicate cell at trial {trial}, timestep {timestep}, channel `{channel}`")]
    DuplicateCell {
        trial: i64,
        timestep: usize,
        channel: String,
    },
    #[error("trial {trial} is missing timestep {timestep} for channel `{channel}`")]
    MissingCell {
        trial: i64,
        timestep: usize,
        channel: String,
    },
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("duplicate channel name `{0}`")]
    DuplicateChannel(String),
    #[error("channel name must be nonempty")]
    EmptyChannelName,
    #[error("sample rate must be positive and finite, got {0}")]
    InvalidSampleRate(f64),
    #[error("no sample rate available: pass one explicitly or provide a `.meta.json` sidecar")]
    MissingSampleRate,
    #[error("data length {found} does not match shape {trials}x{steps}x{channels}")]
    ShapeMismatch {
        trials: usize,
        steps: usize,
        channels: usize,
        found: usize,
    },
    #[error("sidecar channels do not match CSV header")]
    SidecarMismatch,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl TrialDataError {
    /// True when the failure came from the filesystem rather than the content.
    pub fn is_io(&self) -> bool {
        matches!(self, TrialDataError::Io { .. })
    }
}

pub type Result<T, E = TrialDataError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    JointAngle,
    JointVelocity,
    MuscleActivation,
    EmgEnvelope,
    RawEmg,
    Latent,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    pub kind: ChannelKind,
    pub units: String,
}

impl ChannelSpec {
    pub fn new(name: impl Into<String>, kind: ChannelKind, units: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind,
            units: units.into(),
        }
    }

    /// Channel with kind `Other` and empty units.
    pub fn other(name: impl Into<String>) -> Self {
        Self::new(name, ChannelKind::Other, "")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsvFormat {
    CsvLong,
    CsvWide,
}

/// Dense `(trial, timestep, channel)` block. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    data: Vec<f64>,
    n_trials: usize,
    n_steps: usize,
    channels: Vec<ChannelSpec>,
    sample_rate_hz: f64,
}

/// Borrowed view of one trial.
#[derive(Debug, Clone, Copy)]
pub struct TrialSlice<'a> {
    values: &'a [f64],
    channels: &'a [ChannelSpec],
    sample_rate_hz: f64,
}

impl<'a> TrialSlice<'a> {
    pub fn n_steps(&self) -> usize {
        if self.channels.is_empty() {
            0
        } else {
            self.values.len() / self.channels.len()
        }
    }

    pub fn channels(&self) -> &'a [ChannelSpec] {
        self.channels
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn get(&self, step: usize, channel: usize) -> f64 {
        self.values[step * self.channels.len() + channel]
    }

    /// Row-major `(timestep, channel)` values.
    pub fn values(&self) -> &'a [f64] {
        self.values
    }

    pub fn row(&self, step: usize) -> &'a [f64] {
        let c = self.channels.len();
        &self.values[step * c..(step + 1) * c]
    }

    pub fn channel(&self, channel: usize) -> Vec<f64> {
        let c = self.channels.len();
        self.values.iter().skip(channel).step_by(c).copied().collect()
    }
}

fn validate_channels(channels: &[ChannelSpec]) -> Result<()> {
    let mut seen = HashSet::new();
    for ch in channels {
        if ch.name.is_empty() {
            return Err(TrialDataError::EmptyChannelName);
        }
        if !seen.insert(ch.name.as_str()) {
            return Err(TrialDataError::DuplicateChannel(ch.name.clone()));
        }
    }
    Ok(())
}

impl TrialSet {
    /// Builds a set from row-major `(trial, timestep, channel)` data.
    pub fn new(
        channels: Vec<ChannelSpec>,
        sample_rate_hz: f64,
        n_trials: usize,
        n_steps: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(TrialDataError::InvalidSampleRate(sample_rate_hz));
        }
        validate_channels(&channels)?;
        let expected = n_trials * n_steps * channels.len();
        if data.len() != expected {
            return Err(TrialDataError::ShapeMismatch {
                trials: n_trials,
                steps: n_steps,
                channels: channels.len(),
                found: data.len(),
            });
        }
        let c = channels.len().max(1);
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let per_trial = (n_steps * c).max(1);
            return Err(TrialDataError::NonFiniteValue {
                trial: (pos / per_trial) as i64,
                timestep: (pos % per_trial) / c,
                channel: channels[pos % c].name.clone(),
            });
        }
        Ok(Self {
            data,
            n_trials,
            n_steps,
            channels,
            sample_rate_hz,
        })
    }

    /// Builds a set from per-trial, per-channel series indexed `[trial][channel][step]`.
    pub fn from_series(
        channels: Vec<ChannelSpec>,
        sample_rate_hz: f64,
        series: &[Vec<Vec<f64>>],
    ) -> Result<Self> {
        let n_trials = series.len();
        let n_steps = series
            .first()
            .and_then(|t| t.first())
            .map_or(0, |s| s.len());
        let c = channels.len();
        let mut data = Vec::with_capacity(n_trials * n_steps * c);
        for (t, trial) in series.iter().enumerate() {
            if trial.len() != c {
                return Err(TrialDataError::ShapeMismatch {
                    trials: n_trials,
                    steps: n_steps,
                    channels: c,
                    found: trial.len(),
                });
            }
            for s in trial {
                if s.len() != n_steps {
                    return Err(TrialDataError::RaggedTrials {
                        trial: t as i64,
                        expected: n_steps,
                        found: s.len(),
                    });
                }
            }
            for n in 0..n_steps {
                data.extend(trial.iter().map(|s| s[n]));
            }
        }
        Self::new(channels, sample_rate_hz, n_trials, n_steps, data)
    }

    pub fn n_trials(&self) -> usize {
        self.n_trials
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// `(trials, timesteps, channels)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_trials, self.n_steps, self.channels.len())
    }

    pub fn channels(&self) -> &[ChannelSpec] {
        &self.channels
    }

    pub fn channel_names(&self) -> Vec<&str> {
        self.channels.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel_index(&self, name: &str) -> Result<usize> {
        self.channels
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| TrialDataError::UnknownChannel(name.to_string()))
    }

    pub fn get(&self, trial: usize, step: usize, channel: usize) -> f64 {
        self.data[(trial * self.n_steps + step) * self.channels.len() + channel]
    }

    pub fn trial(&self, trial: usize) -> TrialSlice<'_> {
        let stride = self.n_steps * self.channels.len();
        TrialSlice {
            values: &self.data[trial * stride..(trial + 1) * stride],
            channels: &self.channels,
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    pub fn trials(&self) -> impl Iterator<Item = TrialSlice<'_>> {
        (0..self.n_trials).map(move |t| self.trial(t))
    }

    /// One channel of one trial as a contiguous vector.
    pub fn series(&self, trial: usize, channel: usize) -> Vec<f64> {
        self.trial(trial).channel(channel)
    }

    /// All values of a channel, flattened in `(trial, timestep)` order.
    pub fn channel_values(&self, channel: usize) -> Vec<f64> {
        let c = self.channels.len();
        self.data.iter().skip(channel).step_by(c).copied().collect()
    }

    /// Projects onto the named channels, in request order.
    pub fn select_channels<S: AsRef<str>>(&self, names: &[S]) -> Result<TrialSet> {
        let idx = names
            .iter()
            .map(|n| self.channel_index(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let channels: Vec<ChannelSpec> = idx.iter().map(|&i| self.channels[i].clone()).collect();
        let c = self.channels.len();
        let mut data = Vec::with_capacity(self.n_trials * self.n_steps * idx.len());
        for row in self.data.chunks_exact(c.max(1)) {
            data.extend(idx.iter().map(|&i| row[i]));
        }
        if c == 0 {
            data.clear();
        }
        TrialSet::new(channels, self.sample_rate_hz, self.n_trials, self.n_steps, data)
    }

    /// Concatenates channels of two sets with identical trial/timestep shape and rate.
    pub fn concat_channels(&self, other: &TrialSet) -> Result<TrialSet> {
        if self.n_trials != other.n_trials || self.n_steps != other.n_steps {
            return Err(TrialDataError::ShapeMismatch {
                trials: self.n_trials,
                steps: self.n_steps,
                channels: other.n_channels(),
                found: other.n_trials * other.n_steps,
            });
        }
        if self.sample_rate_hz != other.sample_rate_hz {
            return Err(TrialDataError::InvalidSampleRate(other.sample_rate_hz));
        }
        let (ca, cb) = (self.n_channels(), other.n_channels());
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        for r in 0..self.n_trials * self.n_steps {
            data.extend_from_slice(&self.data[r * ca..(r + 1) * ca]);
            data.extend_from_slice(&other.data[r * cb..(r + 1) * cb]);
        }
        let mut channels = self.channels.clone();
        channels.extend(other.channels.iter().cloned());
        TrialSet::new(channels, self.sample_rate_hz, self.n_trials, self.n_steps, data)
    }

    /// Applies `f` to each channel series, producing a set with the same shape.
    pub fn map_series<F>(&self, mut f: F) -> Result<TrialSet>
    where
        F: FnMut(usize, usize, Vec<f64>) -> Vec<f64>,
    {
        let series: Vec<Vec<Vec<f64>>> = (0..self.n_trials)
            .map(|t| {
                (0..self.n_channels())
                    .map(|c| f(t, c, self.series(t, c)))
                    .collect()
            })
            .collect();
        TrialSet::from_series(self.channels.clone(), self.sample_rate_hz, &series)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    sample_rate_hz: f64,
    channels: Vec<ChannelSpec>,
}

/// Path of the metadata sidecar belonging to a CSV file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrialDataError + '_ {
    move |source| TrialDataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> TrialDataError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => TrialDataError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => TrialDataError::Parse {
            line,
            msg: format!("{other:?}"),
        },
    }
}

fn parse_field<T: std::str::FromStr>(field: &str, line: u64, what: &str) -> Result<T> {
    field.trim().parse().map_err(|_| TrialDataError::Parse {
        line,
        msg: format!("invalid {what} `{field}`"),
    })
}

fn parse_value(field: &str, line: u64) -> Result<f64> {
    // `f64::from_str` accepts "NaN"/"inf"; those are caught by the finiteness check.
    parse_field(field, line, "value")
}

/// Loads a trial set. `sample_rate_hz` overrides the sidecar when given.
pub fn load_trialset(
    path: &Path,
    format: CsvFormat,
    sample_rate_hz: Option<f64>,
) -> Result<TrialSet> {
    let sidecar: Option<Sidecar> = {
        let sp = sidecar_path(path);
        if sp.exists() {
            let text = std::fs::read_to_string(&sp).map_err(io_err(&sp))?;
            Some(serde_json::from_str(&text).map_err(|e| TrialDataError::Parse {
                line: e.line() as u64,
                msg: format!("sidecar: {e}"),
            })?)
        } else {
            None
        }
    };
    let rate = sample_rate_hz
        .or(sidecar.as_ref().map(|s| s.sample_rate_hz))
        .ok_or(TrialDataError::MissingSampleRate)?;
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(std::io::BufReader::new(file));
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| TrialDataError::MissingColumn(name.to_string()))
    };
    let trial_col = col("trial")?;
    let step_col = col("timestep")?;

    // trial id -> channel name -> timestep -> value
    let mut cells: BTreeMap<i64, HashMap<String, BTreeMap<usize, f64>>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();

    match format {
        CsvFormat::CsvWide => {
            let value_cols: Vec<usize> = (0..header.len())
                .filter(|&i| i != trial_col && i != step_col)
                .collect();
            if value_cols.is_empty() {
                return Err(TrialDataError::MissingColumn("<channel>".into()));
            }
            order = value_cols.iter().map(|&i| header[i].clone()).collect();
            validate_channels(
                &order
                    .iter()
                    .map(|n| ChannelSpec::other(n.clone()))
                    .collect::<Vec<_>>(),
            )?;
            for rec in reader.records() {
                let rec = rec.map_err(|e| csv_err(path, e))?;
                let line = rec.position().map_or(0, |p| p.line());
                let trial: i64 = parse_field(&rec[trial_col], line, "trial")?;
                let step: usize = parse_field(&rec[step_col], line, "timestep")?;
                let entry = cells.entry(trial).or_default();
                for (&ci, name) in value_cols.iter().zip(&order) {
                    let v = parse_value(&rec[ci], line)?;
                    insert_cell(entry, trial, step, name, v)?;
                }
            }
        }
        CsvFormat::CsvLong => {
            let ch_col = col("channel")?;
            let val_col = col("value")?;
            let mut seen = HashSet::new();
            for rec in reader.records() {
                let rec = rec.map_err(|e| csv_err(path, e))?;
                let line = rec.position().map_or(0, |p| p.line());
                let trial: i64 = parse_field(&rec[trial_col], line, "trial")?;
                let step: usize = parse_field(&rec[step_col], line, "timestep")?;
                let name = rec[ch_col].to_string();
                if name.is_empty() {
                    return Err(TrialDataError::EmptyChannelName);
                }
                let v = parse_value(&rec[val_col], line)?;
                if seen.insert(name.clone()) {
                    order.push(name.clone());
                }
                insert_cell(cells.entry(trial).or_default(), trial, step, &name, v)?;
            }
        }
    }

    let channels = match sidecar {
        Some(sc) => {
            let mut names: Vec<&str> = sc.channels.iter().map(|c| c.name.as_str()).collect();
            let mut got: Vec<&str> = order.iter().map(String::as_str).collect();
            if format == CsvFormat::CsvLong && !cells.is_empty() {
                names.sort_unstable();
                got.sort_unstable();
            } else if format == CsvFormat::CsvLong {
                got = names.clone();
            }
            if names != got {
                return Err(TrialDataError::SidecarMismatch);
            }
            sc.channels
        }
        None => order.iter().map(|n| ChannelSpec::other(n.clone())).collect(),
    };

    let n_steps = cells
        .values()
        .next()
        .map_or(0, |chs| chs.values().map(|m| m.len()).max().unwrap_or(0));
    let mut data = Vec::with_capacity(cells.len() * n_steps * channels.len());
    for (&trial, chs) in &cells {
        let len = chs.values().map(|m| m.len()).max().unwrap_or(0);
        if len != n_steps {
            return Err(TrialDataError::RaggedTrials {
                trial,
                expected: n_steps,
                found: len,
            });
        }
        for step in 0..n_steps {
            for ch in &channels {
                let v = chs
                    .get(&ch.name)
                    .and_then(|m| m.get(&step))
                    .ok_or_else(|| TrialDataError::MissingCell {
                        trial,
                        timestep: step,
                        channel: ch.name.clone(),
                    })?;
                if !v.is_finite() {
                    return Err(TrialDataError::NonFiniteValue {
                        trial,
                        timestep: step,
                        channel: ch.name.clone(),
                    });
                }
                data.push(*v);
            }
        }
    }
    TrialSet::new(channels, rate, cells.len(), n_steps, data)
}

fn insert_cell(
    trial_cells: &mut HashMap<String, BTreeMap<usize, f64>>,
    trial: i64,
    step: usize,
    name: &str,
    v: f64,
) -> Result<()> {
    if !v.is_finite() {
        return Err(TrialDataError::NonFiniteValue {
            trial,
            timestep: step,
            channel: name.to_string(),
        });
    }
    let slot = trial_cells.entry(name.to_string()).or_default();
    if slot.insert(step, v).is_some() {
        return Err(TrialDataError::DuplicateCell {
            trial,
            timestep: step,
            channel: name.to_string(),
        });
    }
    Ok(())
}

/// Writes the set as CSV plus its `.meta.json` sidecar.
pub fn save_trialset(set: &TrialSet, path: &Path, format: CsvFormat) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let io = io_err(path);
    let res: std::io::Result<()> = (|| {
        match format {
            CsvFormat::CsvWide => {
                write!(w, "trial,timestep")?;
                for ch in &set.channels {
                    write!(w, ",{}", ch.name)?;
                }
                writeln!(w)?;
                for t in 0..set.n_trials {
                    let trial = set.trial(t);
                    for n in 0..set.n_steps {
                        write!(w, "{t},{n}")?;
                        for v in trial.row(n) {
                            write!(w, ",{v}")?;
                        }
                        writeln!(w)?;
                    }
                }
            }
            CsvFormat::CsvLong => {
                writeln!(w, "trial,timestep,channel,value")?;
                for t in 0..set.n_trials {
                    let trial = set.trial(t);
                    for n in 0..set.n_steps {
                        for (ch, v) in set.channels.iter().zip(trial.row(n)) {
                            writeln!(w, "{t},{n},{},{v}", ch.name)?;
                        }
                    }
                }
            }
        }
        w.flush()
    })();
    res.map_err(io)?;

    let sp = sidecar_path(path);
    let sidecar = Sidecar {
        sample_rate_hz: set.sample_rate_hz,
        channels: set.channels.clone(),
    };
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(&sp, text + "\n").map_err(io_err(&sp))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> TrialSet {
        TrialSet::new(
            vec![ChannelSpec::other("x")],
            200.0,
            2,
            3,
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        )
        .unwrap()
    }

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn long_format_shape() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "a.csv",
            "trial,timestep,channel,value\n0,0,x,1\n0,1,x,2\n0,2,x,3\n1,0,x,4\n1,1,x,5\n1,2,x,6\n",
        );
        let set = load_trialset(&p, CsvFormat::CsvLong, Some(200.0)).unwrap();
        assert_eq!(set.shape(), (2, 3, 1));
        assert_eq!(set, small());
    }

    #[test]
    fn wide_format_sixty_steps() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from("trial,timestep,biceps,triceps\n");
        for t in 0..2 {
            for n in 0..60 {
                body.push_str(&format!("{t},{n},{},{}\n", n as f64 * 0.5, 1.0 - n as f64));
            }
        }
        let p = write(dir.path(), "w.csv", &body);
        let set = load_trialset(&p, CsvFormat::CsvWide, Some(200.0)).unwrap();
        assert_eq!(set.n_channels(), 2);
        assert_eq!(set.n_steps(), 60);
        assert_eq!(set.channel_names(), vec!["biceps", "triceps"]);
    }

    #[test]
    fn nan_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "n.csv", "trial,timestep,x\n0,0,1\n0,1,NaN\n");
        let err = load_trialset(&p, CsvFormat::CsvWide, Some(1.0)).unwrap_err();
        assert!(matches!(err, TrialDataError::NonFiniteValue { .. }), "{err}");
    }

    #[test]
    fn ragged_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "r.csv", "trial,timestep,x\n0,0,1\n0,1,2\n1,0,3\n");
        let err = load_trialset(&p, CsvFormat::CsvWide, Some(1.0)).unwrap_err();
        assert!(matches!(err, TrialDataError::RaggedTrials { .. }), "{err}");
    }

    #[test]
    fn duplicate_and_missing_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "d.csv",
            "trial,timestep,channel,value\n0,0,x,1\n0,0,x,2\n",
        );
        let err = load_trialset(&p, CsvFormat::CsvLong, Some(1.0)).unwrap_err();
        assert!(matches!(err, TrialDataError::DuplicateCell { .. }));

        let p = write(dir.path(), "m.csv", "trial,step,x\n0,0,1\n");
        let err = load_trialset(&p, CsvFormat::CsvWide, Some(1.0)).unwrap_err();
        assert!(matches!(err, TrialDataError::MissingColumn(ref c) if c == "timestep"));

        let p = write(dir.path(), "m2.csv", "trial,timestep,channel\n0,0,x\n");
        let err = load_trialset(&p, CsvFormat::CsvLong, Some(1.0)).unwrap_err();
        assert!(matches!(err, TrialDataError::MissingColumn(ref c) if c == "value"));
    }

    #[test]
    fn gap_in_timesteps_is_missing_cell() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "g.csv", "trial,timestep,x\n0,0,1\n0,2,2\n");
        let err = load_trialset(&p, CsvFormat::CsvWide, Some(1.0)).unwrap_err();
        assert!(matches!(err, TrialDataError::MissingCell { timestep: 1, .. }));
    }

    #[test]
    fn trials_sorted_by_index() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "s.csv", "trial,timestep,x\n7,0,70\n3,0,30\n");
        let set = load_trialset(&p, CsvFormat::CsvWide, Some(1.0)).unwrap();
        assert_eq!(set.data(), &[30.0, 70.0]);
    }

    #[test]
    fn missing_sample_rate() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "s.csv", "trial,timestep,x\n0,0,1\n");
        assert!(matches!(
            load_trialset(&p, CsvFormat::CsvWide, None),
            Err(TrialDataError::MissingSampleRate)
        ));
    }

    #[test]
    fn round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let set = TrialSet::new(
            vec![
                ChannelSpec::new("q", ChannelKind::JointAngle, "rad"),
                ChannelSpec::new("a", ChannelKind::MuscleActivation, "normalized"),
            ],
            200.0,
            2,
            2,
            vec![0.1, 1e-300, -3.25, 2.0 / 3.0, f64::MAX, f64::MIN_POSITIVE, -0.0, 7.0],
        )
        .unwrap();
        for fmt in [CsvFormat::CsvWide, CsvFormat::CsvLong] {
            let p = dir.path().join(format!("{fmt:?}.csv"));
            save_trialset(&set, &p, fmt).unwrap();
            let back = load_trialset(&p, fmt, None).unwrap();
            assert_eq!(back.channels(), set.channels());
            let bits = |s: &TrialSet| s.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&back), bits(&set));
        }
    }

    #[test]
    fn empty_set_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let set = TrialSet::new(vec![ChannelSpec::other("x")], 10.0, 0, 0, vec![]).unwrap();
        for fmt in [CsvFormat::CsvWide, CsvFormat::CsvLong] {
            let p = dir.path().join(format!("{fmt:?}.csv"));
            save_trialset(&set, &p, fmt).unwrap();
            let back = load_trialset(&p, fmt, None).unwrap();
            assert_eq!(back.n_trials(), 0);
            assert_eq!(back.channel_names(), vec!["x"]);
        }
    }

    #[test]
    fn wide_row_count() {
        let dir = tempfile::tempdir().unwrap();
        let set = TrialSet::new(
            vec![ChannelSpec::other("b"), ChannelSpec::other("t")],
            200.0,
            46,
            60,
            vec![0.5; 46 * 60 * 2],
        )
        .unwrap();
        let p = dir.path().join("w.csv");
        save_trialset(&set, &p, CsvFormat::CsvWide).unwrap();
        let rows = std::fs::read_to_string(&p).unwrap().lines().count() - 1;
        assert_eq!(rows, 2760);
    }

    #[test]
    fn select_channels_permutes() {
        let set = TrialSet::new(
            vec![ChannelSpec::other("biceps"), ChannelSpec::other("triceps")],
            1.0,
            1,
            2,
            vec![1.0, 10.0, 2.0, 20.0],
        )
        .unwrap();
        let sw = set.select_channels(&["triceps", "biceps"]).unwrap();
        assert_eq!(sw.channel_names(), vec!["triceps", "biceps"]);
        assert_eq!(sw.data(), &[10.0, 1.0, 20.0, 2.0]);
        assert_eq!(set.select_channels(&["biceps", "triceps"]).unwrap(), set);
        assert!(matches!(
            set.select_channels(&["wrist"]),
            Err(TrialDataError::UnknownChannel(_))
        ));
    }

    #[test]
    fn invalid_construction() {
        assert!(TrialSet::new(vec![ChannelSpec::other("x")], 0.0, 0, 0, vec![]).is_err());
        assert!(matches!(
            TrialSet::new(
                vec![ChannelSpec::other("x"), ChannelSpec::other("x")],
                1.0,
                0,
                0,
                vec![]
            ),
            Err(TrialDataError::DuplicateChannel(_))
        ));
        assert!(matches!(
            TrialSet::new(vec![ChannelSpec::other("x")], 1.0, 1, 1, vec![f64::INFINITY]),
            Err(TrialDataError::NonFiniteValue { .. })
        ));
    }
}
