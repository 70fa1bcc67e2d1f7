//! PCA of layer activations: flatten `(clips, timesteps, D)` to rows, fit on
//! the centred matrix by SVD, project onto the leading components and
//! reshape back.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::trial_data::{ChannelKind, ChannelSpec, TrialDataError, TrialSet};

#[derive(Debug, Error)]
pub enum PcaError {
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("data has zero variance")]
    DegenerateData,
    #[error("cannot keep {requested} components from a {rows}x{dims} matrix")]
    TooManyComponents {
        requested: usize,
        rows: usize,
        dims: usize,
    },
    #[error("need at least {need} activation channels, got {have}")]
    TooFewChannels { have: usize, need: usize },
    #[error("row length {found} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Data(#[from] TrialDataError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `n_components × D`, orthonormal rows.
    pub components: DMatrix<f64>,
    /// `σᵢ² / Σσ²` for the kept components, nonincreasing.
    pub variance_ratio: Vec<f64>,
}

/// Fits PCA to a `rows × D` matrix.
///
/// Each component is signed so that its largest-magnitude coordinate is
/// positive (first such coordinate on ties).
pub fn fit_pca(matrix: &DMatrix<f64>, n_components: usize) -> Result<PcaModel, PcaError> {
    let (rows, dims) = matrix.shape();
    if rows < 2 {
        return Err(PcaError::TooFewRows(rows));
    }
    if n_components == 0 || n_components > rows.min(dims) {
        return Err(PcaError::TooManyComponents {
            requested: n_components,
            rows,
            dims,
        });
    }
    let mean: Vec<f64> = (0..dims).map(|j| matrix.column(j).mean()).collect();
    let mut centred = matrix.clone();
    for (j, m) in mean.iter().enumerate() {
        centred.column_mut(j).add_scalar_mut(-m);
    }
    let svd = centred.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sigma = svd.singular_values;
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));

    let total: f64 = sigma.iter().map(|s| s * s).sum();
    let scale = matrix.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if total <= (f64::EPSILON * scale).powi(2) * (rows * dims) as f64 {
        return Err(PcaError::DegenerateData);
    }

    let mut components = DMatrix::zeros(n_components, dims);
    let mut variance_ratio = Vec::with_capacity(n_components);
    for (k, &src) in order.iter().take(n_components).enumerate() {
        let row = v_t.row(src);
        let pivot = row
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, v)| {
                if v.abs() > bv.abs() {
                    (i, *v)
                } else {
                    (bi, bv)
                }
            })
            .1;
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        components.row_mut(k).copy_from(&(row * sign));
        variance_ratio.push(sigma[src] * sigma[src] / total);
    }
    Ok(PcaModel {
        mean,
        components,
        variance_ratio,
    })
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Scores of each row: `(X − mean) Vᵀ`, shape `rows × n_components`.
    pub fn transform(&self, matrix: &DMatrix<f64>) -> Result<DMatrix<f64>, PcaError> {
        if matrix.ncols() != self.dim() {
            return Err(PcaError::DimensionMismatch {
                expected: self.dim(),
                found: matrix.ncols(),
            });
        }
        let mut centred = matrix.clone();
        for (j, m) in self.mean.iter().enumerate() {
            centred.column_mut(j).add_scalar_mut(-m);
        }
        Ok(centred * self.components.transpose())
    }

    /// Maps scores back to the original space.
    pub fn inverse_transform(&self, scores: &DMatrix<f64>) -> Result<DMatrix<f64>, PcaError> {
        if scores.ncols() != self.n_components() {
            return Err(PcaError::DimensionMismatch {
                expected: self.n_components(),
                found: scores.ncols(),
            });
        }
        let mut out = scores * &self.components;
        for (j, m) in self.mean.iter().enumerate() {
            out.column_mut(j).add_scalar_mut(*m);
        }
        Ok(out)
    }
}

/// Projected activations with the same clip/timestep layout as the input.
#[derive(Debug, Clone)]
pub struct LatentEmbedding {
    /// Channels `pc1..pcK`, kind `Latent`.
    pub data: TrialSet,
    pub variance_ratio: Vec<f64>,
    /// Behavior channel carried alongside, flattened `(clip, timestep)`.
    pub behavior: Option<(String, Vec<f64>)>,
    pub model: PcaModel,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceReport {
    pub variance_ratio: Vec<f64>,
    pub total: f64,
}

impl LatentEmbedding {
    pub fn report(&self) -> VarianceReport {
        VarianceReport {
            variance_ratio: self.variance_ratio.clone(),
            total: self.variance_ratio.iter().sum(),
        }
    }

    /// Ratios as percentages with one decimal, e.g. `45.2%, 32.1%, 20.7%`.
    pub fn percentages(&self) -> String {
        self.variance_ratio
            .iter()
            .map(|r| format!("{:.1}%", 100.0 * r))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Flattens `(clips, timesteps, D)` into a `(clips·timesteps) × D` matrix.
pub fn flatten(set: &TrialSet) -> DMatrix<f64> {
    let rows = set.n_trials() * set.n_steps();
    DMatrix::from_row_slice(rows, set.n_channels(), set.data())
}

/// PCA over every channel of `acts` except `behavior`, keeping `n_components`.
pub fn project(
    acts: &TrialSet,
    behavior: Option<&str>,
    n_components: usize,
) -> Result<LatentEmbedding, PcaError> {
    let carried = match behavior {
        Some(name) => {
            let idx = acts.channel_index(name)?;
            Some((name.to_string(), acts.channel_values(idx)))
        }
        None => None,
    };
    let features: Vec<&str> = acts
        .channel_names()
        .into_iter()
        .filter(|n| Some(*n) != behavior)
        .collect();
    if features.len() < n_components.max(1) {
        return Err(PcaError::TooFewChannels {
            have: features.len(),
            need: n_components.max(1),
        });
    }
    let feats = acts.select_channels(&features)?;
    let matrix = flatten(&feats);
    let model = fit_pca(&matrix, n_components)?;
    let scores = model.transform(&matrix)?;
    let mut data = Vec::with_capacity(scores.len());
    for r in 0..scores.nrows() {
        data.extend(scores.row(r).iter().copied());
    }
    let channels = (1..=n_components)
        .map(|k| ChannelSpec::new(format!("pc{k}"), ChannelKind::Latent, ""))
        .collect();
    let data = TrialSet::new(
        channels,
        acts.sample_rate_hz(),
        acts.n_trials(),
        acts.n_steps(),
        data,
    )?;
    Ok(LatentEmbedding {
        data,
        variance_ratio: model.variance_ratio.clone(),
        behavior: carried,
        model,
    })
}

/// Three-component projection, reshaped to `(clips, timesteps, 3)`.
pub fn project_top3(acts: &TrialSet, behavior: Option<&str>) -> Result<LatentEmbedding, PcaError> {
    project(acts, behavior, 3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_line() {
        let m = DMatrix::from_fn(20, 3, |i, j| (i as f64 - 7.0) * [1.0, -2.0, 0.5][j]);
        let model = fit_pca(&m, 1).unwrap();
        assert!((model.variance_ratio[0] - 1.0).abs() < 1e-12);
        // sign convention: largest coordinate (-2 direction) flipped positive
        let c = model.components.row(0);
        assert!(c[1] > 0.0);
        assert!((c.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_rows_same_model() {
        let m = DMatrix::from_fn(30, 4, |i, j| ((i * 13 + j * 7) % 11) as f64 + (i * j) as f64 * 0.1);
        let mut dup = DMatrix::zeros(60, 4);
        dup.rows_mut(0, 30).copy_from(&m);
        dup.rows_mut(30, 30).copy_from(&m);
        let a = fit_pca(&m, 3).unwrap();
        let b = fit_pca(&dup, 3).unwrap();
        for (x, y) in a.variance_ratio.iter().zip(&b.variance_ratio) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!((&a.components - &b.components).amax() < 1e-8);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            fit_pca(&DMatrix::from_element(1, 3, 1.0), 1),
            Err(PcaError::TooFewRows(1))
        ));
        assert!(matches!(
            fit_pca(&DMatrix::from_element(5, 3, 1.0), 1),
            Err(PcaError::DegenerateData)
        ));
        assert!(matches!(
            fit_pca(&DMatrix::from_fn(5, 2, |i, j| (i + j) as f64), 3),
            Err(PcaError::TooManyComponents { .. })
        ));
        let acts = TrialSet::new(
            vec![ChannelSpec::other("a"), ChannelSpec::other("b")],
            1.0,
            1,
            4,
            vec![1.0, 2.0, 3.0, 1.0, 0.0, 5.0, 2.0, 2.0],
        )
        .unwrap();
        assert!(matches!(
            project_top3(&acts, None),
            Err(PcaError::TooFewChannels { have: 2, need: 3 })
        ));
    }

    #[test]
    fn behavior_is_carried_not_fitted() {
        let acts = TrialSet::from_series(
            vec![
                ChannelSpec::other("u0"),
                ChannelSpec::other("u1"),
                ChannelSpec::other("u2"),
                ChannelSpec::other("q"),
            ],
            200.0,
            &[vec![
                vec![1.0, 2.0, 0.0, 4.0, 3.0],
                vec![0.0, 1.0, 1.0, 3.0, 2.0],
                vec![5.0, 1.0, 2.0, 0.0, 1.0],
                vec![0.1, 0.2, 0.3, 0.4, 0.5],
            ]],
        )
        .unwrap();
        let emb = project_top3(&acts, Some("q")).unwrap();
        assert_eq!(emb.data.shape(), (1, 5, 3));
        assert_eq!(emb.model.dim(), 3);
        let (name, values) = emb.behavior.as_ref().unwrap();
        assert_eq!(name, "q");
        assert_eq!(values, &vec![0.1, 0.2, 0.3, 0.4, 0.5]);
        assert_eq!(emb.percentages().matches('%').count(), 3);
    }
}
