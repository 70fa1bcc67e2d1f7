//! EMG envelope extraction: bandpass, full-wave rectification, envelope
//! lowpass, block-average downsampling, fixed-length clipping and pooled
//! percentile normalization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::{design_butterworth, filter_zero_phase, FilterError, FilterKind};
use crate::trial_data::{ChannelKind, ChannelSpec, TrialDataError, TrialSet};

#[derive(Debug, Error)]
pub enum EmgError {
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Data(#[from] TrialDataError),
    #[error("invalid envelope config: {0}")]
    InvalidConfig(String),
    #[error("empty input for block averaging (len {len}, factor {factor})")]
    EmptyInput { len: usize, factor: usize },
    #[error("input sample rate {found} Hz does not match configured {expected} Hz")]
    SampleRateMismatch { expected: f64, found: f64 },
    #[error("trial {trial} has {len} samples, need at least {needed}")]
    TrialTooShort {
        trial: usize,
        len: usize,
        needed: usize,
    },
}

/// Parameters of the envelope chain. Defaults match a 30 kHz recording
/// reduced to 60 samples at 200 Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub fs_in_hz: f64,
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    pub lp_hz: f64,
    pub fs_out_hz: f64,
    pub clip_len: usize,
    pub norm_percentile: f64,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self {
            fs_in_hz: 30_000.0,
            band_lo_hz: 20.0,
            band_hi_hz: 1000.0,
            lp_hz: 50.0,
            fs_out_hz: 200.0,
            clip_len: 60,
            norm_percentile: 98.0,
        }
    }
}

impl EnvelopeConfig {
    /// Integer ratio `fs_in / fs_out`.
    pub fn downsample_factor(&self) -> Result<usize, EmgError> {
        let ratio = self.fs_in_hz / self.fs_out_hz;
        let factor = ratio.round();
        if !(factor >= 1.0 && (ratio - factor).abs() < 1e-9 * ratio.max(1.0)) {
            return Err(EmgError::InvalidConfig(format!(
                "fs_in/fs_out = {ratio} is not a positive integer"
            )));
        }
        Ok(factor as usize)
    }

    pub fn validate(&self) -> Result<(), EmgError> {
        let bad = |m: &str| Err(EmgError::InvalidConfig(m.to_string()));
        let all_finite = [
            self.fs_in_hz,
            self.band_lo_hz,
            self.band_hi_hz,
            self.lp_hz,
            self.fs_out_hz,
            self.norm_percentile,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return bad("all values must be finite");
        }
        if !(0.0 < self.band_lo_hz
            && self.band_lo_hz < self.band_hi_hz
            && self.band_hi_hz < self.fs_in_hz / 2.0)
        {
            return bad("need 0 < band_lo_hz < band_hi_hz < fs_in_hz/2");
        }
        if !(0.0 < self.lp_hz
            && self.lp_hz < self.fs_out_hz / 2.0
            && self.fs_out_hz <= self.fs_in_hz)
        {
            return bad("need 0 < lp_hz < fs_out_hz/2 <= fs_in_hz/2");
        }
        if self.clip_len == 0 {
            return bad("clip_len must be >= 1");
        }
        if !(self.norm_percentile > 0.0 && self.norm_percentile <= 100.0) {
            return bad("norm_percentile must be in (0, 100]");
        }
        self.downsample_factor()?;
        Ok(())
    }
}

pub fn rectify(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.abs()).collect()
}

/// Mean of consecutive non-overlapping blocks; a trailing partial block is dropped.
pub fn block_downsample(x: &[f64], factor: usize) -> Result<Vec<f64>, EmgError> {
    if factor == 0 || x.len() < factor {
        return Err(EmgError::EmptyInput {
            len: x.len(),
            factor,
        });
    }
    Ok(x.chunks_exact(factor)
        .map(|b| b.iter().sum::<f64>() / factor as f64)
        .collect())
}

/// Percentile with linear interpolation between order statistics
/// (rank `p/100 · (n−1)`). Returns `None` for empty input.
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = (p / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Some(v[lo] + (v[hi] - v[lo]) * frac)
}

/// Envelope of a single raw series, before normalization.
pub fn envelope_series(
    raw: &[f64],
    bandpass: &crate::filter::BiquadCascade,
    lowpass: &crate::filter::BiquadCascade,
    factor: usize,
    clip_len: usize,
) -> Result<Vec<f64>, EmgError> {
    let band = filter_zero_phase(bandpass, raw)?;
    let rect = rectify(&band);
    let smooth = filter_zero_phase(lowpass, &rect)?;
    let mut down = block_downsample(&smooth, factor)?;
    down.truncate(clip_len);
    Ok(down)
}

/// Outcome of envelope extraction with the per-channel normalization scale.
#[derive(Debug, Clone)]
pub struct EnvelopeOutput {
    pub envelopes: TrialSet,
    /// Pooled percentile used as the divisor, one per channel (0 when degenerate).
    pub scales: Vec<f64>,
}

/// Runs the full chain on every trial and channel of `raw`.
///
/// Each channel is divided by its `norm_percentile` percentile pooled across
/// all trials and timesteps, then clamped to `[0, 1]`. A channel whose
/// percentile is not positive comes out all zeros.
pub fn extract_envelopes(raw: &TrialSet, cfg: &EnvelopeConfig) -> Result<EnvelopeOutput, EmgError> {
    cfg.validate()?;
    if raw.sample_rate_hz() != cfg.fs_in_hz {
        return Err(EmgError::SampleRateMismatch {
            expected: cfg.fs_in_hz,
            found: raw.sample_rate_hz(),
        });
    }
    let factor = cfg.downsample_factor()?;
    let needed = cfg.clip_len * factor;
    if raw.n_trials() > 0 && raw.n_steps() < needed {
        return Err(EmgError::TrialTooShort {
            trial: 0,
            len: raw.n_steps(),
            needed,
        });
    }
    let bandpass = design_butterworth(
        4,
        FilterKind::Bandpass,
        &[cfg.band_lo_hz, cfg.band_hi_hz],
        cfg.fs_in_hz,
    )?;
    let lowpass = design_butterworth(4, FilterKind::Lowpass, &[cfg.lp_hz], cfg.fs_in_hz)?;

    let n_ch = raw.n_channels();
    let jobs: Vec<(usize, usize)> = (0..raw.n_trials())
        .flat_map(|t| (0..n_ch).map(move |c| (t, c)))
        .collect();
    let env: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(t, c)| envelope_series(&raw.series(t, c), &bandpass, &lowpass, factor, cfg.clip_len))
        .collect::<Result<_, _>>()?;

    let scales: Vec<f64> = (0..n_ch)
        .map(|c| {
            let pooled: Vec<f64> = (0..raw.n_trials())
                .flat_map(|t| env[t * n_ch + c].iter().copied())
                .collect();
            percentile(&pooled, cfg.norm_percentile).unwrap_or(0.0)
        })
        .collect();

    let series: Vec<Vec<Vec<f64>>> = (0..raw.n_trials())
        .map(|t| {
            (0..n_ch)
                .map(|c| {
                    let s = scales[c];
                    env[t * n_ch + c]
                        .iter()
                        .map(|&v| if s > 0.0 { (v / s).clamp(0.0, 1.0) } else { 0.0 })
                        .collect()
                })
                .collect()
        })
        .collect();
    let channels = raw
        .channels()
        .iter()
        .map(|ch| ChannelSpec::new(ch.name.clone(), ChannelKind::EmgEnvelope, "normalized"))
        .collect();
    let envelopes = if raw.n_trials() == 0 {
        TrialSet::new(channels, cfg.fs_out_hz, 0, 0, vec![])?
    } else {
        TrialSet::from_series(channels, cfg.fs_out_hz, &series)?
    };
    Ok(EnvelopeOutput {
        envelopes,
        scales: scales.iter().map(|&s| s.max(0.0)).collect(),
    })
}
