//! Empirical dynamic modeling: delay embeddings, simplex projection,
//! cross-prediction between channels and the (E, τ, Tp) grid search.
//!
//! Embedding vectors never span trials. Every point remembers its
//! [`Origin`] so neighbor exclusion and library/query splits can be
//! expressed in trial/timestep terms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{spearman_rho, StatsError};
use crate::trial_data::{TrialDataError, TrialSet};

#[derive(Debug, Error, PartialEq)]
pub enum EdmError {
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("trials have {len} timesteps; this embedding needs at least {needed}")]
    TrialTooShort { len: usize, needed: usize },
    #[error("library has {have} usable points; need at least {need}")]
    LibraryTooSmall { have: usize, need: usize },
    #[error("query dimension {query} does not match library dimension {library}")]
    DimensionMismatch { library: usize, query: usize },
    #[error("split {split:?} needs at least {need} trials, have {have}")]
    InsufficientTrials { split: Split, have: usize, need: usize },
    #[error("invalid embedding config: {0}")]
    InvalidConfig(String),
    #[error("empty parameter range for {0}")]
    EmptyRange(&'static str),
    #[error("rank correlation failed: {0}")]
    Rho(#[from] StatsError),
}

impl From<TrialDataError> for EdmError {
    fn from(e: TrialDataError) -> Self {
        match e {
            TrialDataError::UnknownChannel(c) => EdmError::UnknownChannel(c),
            other => EdmError::InvalidConfig(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    /// Lagged copies of a single column.
    UnivariateDelay,
    /// The listed columns at lag 0; `E` equals the number of columns.
    MultivariateDirect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    LeaveOneTrialOut,
    HalfSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    #[serde(rename = "E")]
    pub e: usize,
    pub tau: i64,
    #[serde(rename = "Tp")]
    pub tp: usize,
    /// Library points within this many timesteps of the query (same trial) are skipped.
    pub theiler: usize,
    /// Skip the library point sharing the query's origin.
    pub exclude_self: bool,
    pub columns: Vec<String>,
    pub target: String,
    pub mode: EmbeddingMode,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            e: 2,
            tau: -1,
            tp: 1,
            theiler: 0,
            exclude_self: true,
            columns: Vec::new(),
            target: String::new(),
            mode: EmbeddingMode::UnivariateDelay,
        }
    }
}

impl EmbeddingConfig {
    pub fn univariate(column: &str, target: &str, e: usize, tau: i64, tp: usize) -> Self {
        Self {
            e,
            tau,
            tp,
            columns: vec![column.to_string()],
            target: target.to_string(),
            ..Self::default()
        }
    }

    pub fn multivariate<S: AsRef<str>>(columns: &[S], target: &str, tp: usize) -> Self {
        Self {
            e: columns.len(),
            tp,
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            target: target.to_string(),
            mode: EmbeddingMode::MultivariateDirect,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EdmError> {
        let bad = |m: String| Err(EdmError::InvalidConfig(m));
        if self.e == 0 {
            return bad("E must be >= 1".into());
        }
        if self.tp == 0 {
            return bad("Tp must be >= 1".into());
        }
        if self.target.is_empty() {
            return bad("target channel is required".into());
        }
        match self.mode {
            EmbeddingMode::UnivariateDelay => {
                if self.tau == 0 {
                    return bad("tau must be nonzero".into());
                }
                if self.columns.len() != 1 {
                    return bad(format!(
                        "univariate_delay takes exactly one column, got {}",
                        self.columns.len()
                    ));
                }
            }
            EmbeddingMode::MultivariateDirect => {
                if self.columns.is_empty() || self.e != self.columns.len() {
                    return bad(format!(
                        "multivariate_direct needs E == number of columns ({} vs {})",
                        self.e,
                        self.columns.len()
                    ));
                }
            }
        }
        Ok(())
    }

    /// Minimum trial length for at least one embedded point.
    pub fn min_trial_len(&self) -> usize {
        match self.mode {
            EmbeddingMode::UnivariateDelay => {
                (self.e - 1) * self.tau.unsigned_abs() as usize + self.tp + 1
            }
            EmbeddingMode::MultivariateDirect => self.tp + 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Origin {
    pub trial: usize,
    pub timestep: usize,
}

/// Embedded points with their origins and target values `Tp` steps ahead.
/// Points are stored in `(trial, timestep)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedLibrary {
    dim: usize,
    coords: Vec<f64>,
    origins: Vec<Origin>,
    futures: Vec<f64>,
    config: EmbeddingConfig,
}

impl EmbeddedLibrary {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn config(&self) -> &EmbeddingConfig {
        &self.config
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn origin(&self, i: usize) -> Origin {
        self.origins[i]
    }

    pub fn origins(&self) -> &[Origin] {
        &self.origins
    }

    pub fn future(&self, i: usize) -> f64 {
        self.futures[i]
    }

    pub fn futures(&self) -> &[f64] {
        &self.futures
    }

    /// Keeps only points whose trial satisfies `keep`.
    pub fn filter_trials(&self, keep: impl Fn(usize) -> bool) -> EmbeddedLibrary {
        let mut out = EmbeddedLibrary {
            dim: self.dim,
            coords: Vec::new(),
            origins: Vec::new(),
            futures: Vec::new(),
            config: self.config.clone(),
        };
        for i in 0..self.len() {
            if keep(self.origins[i].trial) {
                out.coords.extend_from_slice(self.point(i));
                out.origins.push(self.origins[i]);
                out.futures.push(self.futures[i]);
            }
        }
        out
    }

    /// Replaces the future values, e.g. with a surrogate target.
    pub fn with_futures(mut self, futures: Vec<f64>) -> Self {
        assert_eq!(futures.len(), self.len());
        self.futures = futures;
        self
    }
}

/// Builds the embedding described by `cfg` over every trial of `set`.
pub fn delay_embed(set: &TrialSet, cfg: &EmbeddingConfig) -> Result<EmbeddedLibrary, EdmError> {
    cfg.validate()?;
    let cols = cfg
        .columns
        .iter()
        .map(|c| set.channel_index(c))
        .collect::<Result<Vec<_>, _>>()?;
    let target = set.channel_index(&cfg.target)?;
    let n = set.n_steps();
    let needed = cfg.min_trial_len();
    if set.n_trials() > 0 && n < needed {
        return Err(EdmError::TrialTooShort { len: n, needed });
    }

    let dim = match cfg.mode {
        EmbeddingMode::UnivariateDelay => cfg.e,
        EmbeddingMode::MultivariateDirect => cols.len(),
    };
    let span = (cfg.e as i64 - 1) * cfg.tau;
    // valid t: every lag index t + j·τ and the future t + Tp lie in [0, n)
    let t_lo = if cfg.mode == EmbeddingMode::UnivariateDelay && span < 0 {
        (-span) as usize
    } else {
        0
    };
    let t_hi_excl = {
        let mut hi = n.saturating_sub(cfg.tp);
        if cfg.mode == EmbeddingMode::UnivariateDelay && span > 0 {
            hi = hi.min(n.saturating_sub(span as usize));
        }
        hi
    };

    let mut lib = EmbeddedLibrary {
        dim,
        coords: Vec::new(),
        origins: Vec::new(),
        futures: Vec::new(),
        config: cfg.clone(),
    };
    for trial in 0..set.n_trials() {
        let slice = set.trial(trial);
        for t in t_lo..t_hi_excl.max(t_lo) {
            match cfg.mode {
                EmbeddingMode::UnivariateDelay => {
                    for j in 0..cfg.e as i64 {
                        let idx = (t as i64 + j * cfg.tau) as usize;
                        lib.coords.push(slice.get(idx, cols[0]));
                    }
                }
                EmbeddingMode::MultivariateDirect => {
                    lib.coords.extend(cols.iter().map(|&c| slice.get(t, c)));
                }
            }
            lib.origins.push(Origin { trial, timestep: t });
            lib.futures.push(slice.get(t + cfg.tp, target));
        }
    }
    Ok(lib)
}

/// Normalized simplex weights from neighbor distances sorted ascending.
///
/// `wᵢ = exp(−dᵢ/d₁)` with `d₁` the nearest distance; when `d₁ = 0` the
/// exact matches share the weight equally.
pub fn simplex_weights(distances: &[f64]) -> Vec<f64> {
    let Some(&d1) = distances.first() else {
        return Vec::new();
    };
    let raw: Vec<f64> = if d1 == 0.0 {
        distances
            .iter()
            .map(|&d| if d == 0.0 { 1.0 } else { 0.0 })
            .collect()
    } else {
        distances.iter().map(|&d| (-d / d1).exp()).collect()
    };
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    pub origin: Origin,
    pub predicted: f64,
    pub observed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub predictions: Vec<Prediction>,
    pub rho: f64,
    pub config: EmbeddingConfig,
}

impl ForecastResult {
    pub fn observed(&self) -> Vec<f64> {
        self.predictions.iter().map(|p| p.observed).collect()
    }

    pub fn predicted(&self) -> Vec<f64> {
        self.predictions.iter().map(|p| p.predicted).collect()
    }
}

/// k nearest candidates as `(squared distance, library index)`, sorted by
/// distance then origin.
fn nearest(
    library: &EmbeddedLibrary,
    query: &[f64],
    k: usize,
    skip: impl Fn(Origin) -> bool,
) -> Vec<(f64, usize)> {
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for i in 0..library.len() {
        if skip(library.origins[i]) {
            continue;
        }
        let p = library.point(i);
        let d2: f64 = p.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.len() == k {
            let (worst_d, worst_i) = best[k - 1];
            let better = d2 < worst_d
                || (d2 == worst_d && library.origins[i] < library.origins[worst_i]);
            if !better {
                continue;
            }
            best.pop();
        }
        let pos = best
            .iter()
            .position(|&(d, j)| d2 < d || (d2 == d && library.origins[i] < library.origins[j]))
            .unwrap_or(best.len());
        best.insert(pos, (d2, i));
    }
    best
}

fn forecast_with(
    library: &EmbeddedLibrary,
    queries: &EmbeddedLibrary,
    exclude: impl Fn(Origin, Origin) -> bool + Sync,
) -> Result<ForecastResult, EdmError> {
    if library.dim != queries.dim {
        return Err(EdmError::DimensionMismatch {
            library: library.dim,
            query: queries.dim,
        });
    }
    let cfg = library.config.clone();
    let k = library.dim + 1;
    if library.len() < k {
        return Err(EdmError::LibraryTooSmall {
            have: library.len(),
            need: k,
        });
    }
    let predictions: Vec<Option<Prediction>> = (0..queries.len())
        .into_par_iter()
        .map(|q| {
            let qo = queries.origins[q];
            let nn = nearest(library, queries.point(q), k, |lo| exclude(qo, lo));
            if nn.len() < k {
                return None;
            }
            let dists: Vec<f64> = nn.iter().map(|(d2, _)| d2.sqrt()).collect();
            let w = simplex_weights(&dists);
            let predicted = nn
                .iter()
                .zip(&w)
                .map(|((_, i), wi)| wi * library.futures[*i])
                .sum();
            Some(Prediction {
                origin: qo,
                predicted,
                observed: queries.futures[q],
            })
        })
        .collect();
    let predictions: Vec<Prediction> = predictions.into_iter().flatten().collect();
    if predictions.is_empty() {
        return Err(EdmError::LibraryTooSmall { have: 0, need: k });
    }
    let obs: Vec<f64> = predictions.iter().map(|p| p.observed).collect();
    let pred: Vec<f64> = predictions.iter().map(|p| p.predicted).collect();
    let rho = spearman_rho(&obs, &pred)?;
    Ok(ForecastResult {
        predictions,
        rho,
        config: cfg,
    })
}

/// Simplex projection of every query against `library` with `k = E + 1`
/// neighbors. Exclusion follows the library's config: library points in the
/// query's trial within `theiler` timesteps are skipped, and the point at the
/// query's own origin is skipped when `exclude_self` is set. Queries left
/// with fewer than `k` candidates are not predicted.
pub fn simplex_forecast(
    library: &EmbeddedLibrary,
    queries: &EmbeddedLibrary,
) -> Result<ForecastResult, EdmError> {
    let theiler = library.config.theiler;
    let exclude_self = library.config.exclude_self;
    forecast_with(library, queries, move |q, l| {
        if q.trial != l.trial {
            return false;
        }
        let gap = q.timestep.abs_diff(l.timestep);
        gap <= theiler && (gap != 0 || exclude_self)
    })
}

/// Predicts `cfg.target` from `cfg.columns` with disjoint library and query trials.
pub fn cross_predict(
    set: &TrialSet,
    cfg: &EmbeddingConfig,
    split: Split,
) -> Result<ForecastResult, EdmError> {
    let n_trials = set.n_trials();
    if n_trials < 2 {
        return Err(EdmError::InsufficientTrials {
            split,
            have: n_trials,
            need: 2,
        });
    }
    let all = delay_embed(set, cfg)?;
    match split {
        // every query trial is absent from its own library
        Split::LeaveOneTrialOut => forecast_with(&all, &all, |q, l| q.trial == l.trial),
        Split::HalfSplit => {
            let half = n_trials / 2;
            let library = all.filter_trials(|t| t < half);
            let queries = all.filter_trials(|t| t >= half);
            forecast_with(&library, &queries, |_, _| false)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchRow {
    #[serde(rename = "E")]
    pub e: usize,
    pub tau: i64,
    #[serde(rename = "Tp")]
    pub tp: usize,
    pub rho: f64,
    pub n_pred: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchTable {
    /// Sorted by `(E, tau, Tp)`.
    pub rows: Vec<SearchRow>,
    /// Index of the highest-ρ row (first in sort order on ties).
    pub best: usize,
}

impl SearchTable {
    pub fn best_row(&self) -> &SearchRow {
        &self.rows[self.best]
    }
}

/// Evaluates [`cross_predict`] over the Cartesian product of the ranges.
///
/// In `multivariate_direct` mode `E` is fixed by the column count, so
/// `e_range` must contain only that value.
pub fn param_search(
    set: &TrialSet,
    base: &EmbeddingConfig,
    e_range: &[usize],
    tau_range: &[i64],
    tp_range: &[usize],
    split: Split,
) -> Result<SearchTable, EdmError> {
    if e_range.is_empty() {
        return Err(EdmError::EmptyRange("E"));
    }
    if tau_range.is_empty() {
        return Err(EdmError::EmptyRange("tau"));
    }
    if tp_range.is_empty() {
        return Err(EdmError::EmptyRange("Tp"));
    }
    let mut grid: Vec<(usize, i64, usize)> = Vec::new();
    for &e in e_range {
        for &tau in tau_range {
            for &tp in tp_range {
                grid.push((e, tau, tp));
            }
        }
    }
    grid.sort_unstable();
    grid.dedup();
    let rows = grid
        .par_iter()
        .map(|&(e, tau, tp)| {
            let cfg = EmbeddingConfig {
                e,
                tau,
                tp,
                ..base.clone()
            };
            let r = cross_predict(set, &cfg, split)?;
            Ok(SearchRow {
                e,
                tau,
                tp,
                rho: r.rho,
                n_pred: r.predictions.len(),
            })
        })
        .collect::<Result<Vec<_>, EdmError>>()?;
    let best = rows
        .iter()
        .enumerate()
        .fold(0, |b, (i, r)| if r.rho > rows[b].rho { i } else { b });
    Ok(SearchTable { rows, best })
}
