//! Imitation reward terms, the high-frequency power fraction and seed-sweep
//! aggregation.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::trial_data::{TrialDataError, TrialSet};

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
    #[error("invalid reward weights: {0}")]
    InvalidWeights(String),
    #[error("invalid band ({lo}, {hi}) Hz for sample rate {fs} Hz")]
    InvalidBand { lo: f64, hi: f64, fs: f64 },
    #[error("signal of length {0} too short for a spectral estimate (need >= 8)")]
    TooShort(usize),
    #[error("parameter {param} has {n} seeds; need at least 2")]
    TooFewSeeds { param: f64, n: usize },
    #[error("parameter value {0} appears more than once")]
    DuplicateParam(f64),
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
}

impl From<TrialDataError> for RewardError {
    fn from(e: TrialDataError) -> Self {
        match e {
            TrialDataError::UnknownChannel(c) => RewardError::UnknownChannel(c),
            other => RewardError::InvalidWeights(other.to_string()),
        }
    }
}

/// Weights of the imitation reward. The default is the joint-only setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub lambda_joint: f64,
    pub lambda_ctrl: f64,
    pub lambda_energy: f64,
    pub alpha_joint: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self::joint_only()
    }
}

impl RewardWeights {
    pub fn joint_only() -> Self {
        Self {
            lambda_joint: 5.0,
            lambda_ctrl: 0.0,
            lambda_energy: 0.0,
            alpha_joint: 0.2,
        }
    }

    pub fn physics_aware() -> Self {
        Self {
            lambda_ctrl: 0.15,
            lambda_energy: 0.01,
            ..Self::joint_only()
        }
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        let lambdas = [self.lambda_joint, self.lambda_ctrl, self.lambda_energy];
        if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(RewardError::InvalidWeights(
                "lambda weights must be finite and >= 0".into(),
            ));
        }
        if !(self.alpha_joint.is_finite() && self.alpha_joint > 0.0) {
            return Err(RewardError::InvalidWeights("alpha_joint must be > 0".into()));
        }
        Ok(())
    }
}

/// `exp(−α Σ (qᵢ − q̂ᵢ)²)`.
pub fn joint_reward(q: &[f64], q_ref: &[f64], alpha: f64) -> Result<f64, RewardError> {
    if q.len() != q_ref.len() {
        return Err(RewardError::LengthMismatch(q.len(), q_ref.len()));
    }
    if q.is_empty() {
        return Err(RewardError::Empty);
    }
    if !(alpha > 0.0) {
        return Err(RewardError::InvalidWeights("alpha must be > 0".into()));
    }
    let sq: f64 = q.iter().zip(q_ref).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-alpha * sq).exp())
}

/// Sum of squared actions.
pub fn control_cost(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// `Σⱼ |vⱼ|·|fⱼ|`.
pub fn energy_cost(v: &[f64], f: &[f64]) -> Result<f64, RewardError> {
    if v.len() != f.len() {
        return Err(RewardError::LengthMismatch(v.len(), f.len()));
    }
    Ok(v.iter().zip(f).map(|(a, b)| a.abs() * b.abs()).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RewardEntry {
    pub r_joint: f64,
    pub c_ctrl: f64,
    pub c_energy: f64,
    pub r_total: f64,
}

impl RewardEntry {
    /// Recombines stored terms under (possibly different) weights.
    pub fn combine(r_joint: f64, c_ctrl: f64, c_energy: f64, w: &RewardWeights) -> Self {
        Self {
            r_joint,
            c_ctrl,
            c_energy,
            r_total: w.lambda_joint * r_joint - w.lambda_ctrl * c_ctrl - w.lambda_energy * c_energy,
        }
    }
}

pub fn total_reward(
    q: &[f64],
    q_ref: &[f64],
    a: &[f64],
    v: &[f64],
    f: &[f64],
    w: &RewardWeights,
) -> Result<RewardEntry, RewardError> {
    w.validate()?;
    let r_joint = joint_reward(q, q_ref, w.alpha_joint)?;
    let c_ctrl = control_cost(a);
    let c_energy = energy_cost(v, f)?;
    Ok(RewardEntry::combine(r_joint, c_ctrl, c_energy, w))
}

/// Per-timestep reward terms, columns of equal length.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RewardTrace {
    pub r_joint: Vec<f64>,
    pub c_ctrl: Vec<f64>,
    pub c_energy: Vec<f64>,
    pub r_total: Vec<f64>,
}

impl RewardTrace {
    pub fn push(&mut self, e: RewardEntry) {
        self.r_joint.push(e.r_joint);
        self.c_ctrl.push(e.c_ctrl);
        self.c_energy.push(e.c_energy);
        self.r_total.push(e.r_total);
    }

    pub fn len(&self) -> usize {
        self.r_total.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_total.is_empty()
    }

    pub fn mean_total(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.r_total.iter().sum::<f64>() / self.len() as f64)
    }
}

/// Band actually used for `high_freq_power`: the upper edge is clamped to
/// Nyquist. Returns `(lo, hi, clamped)`.
pub fn effective_band(fs: f64, band: (f64, f64)) -> Result<(f64, f64, bool), RewardError> {
    let (lo, hi) = band;
    let nyquist = fs / 2.0;
    if !(fs > 0.0 && lo >= 0.0 && lo < hi && lo < nyquist) {
        return Err(RewardError::InvalidBand { lo, hi, fs });
    }
    Ok((lo, hi.min(nyquist), hi > nyquist))
}

/// One-sided periodogram of the mean-removed signal: `(freq_hz, power)` for
/// bins `1..=n/2`. Interior bins count twice (their negative-frequency mirror).
pub fn periodogram(x: &[f64], fs: f64) -> Vec<(f64, f64)> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    (1..=n / 2)
        .map(|k| {
            let mirrored = if 2 * k == n { 1.0 } else { 2.0 };
            (k as f64 * fs / n as f64, mirrored * buf[k].norm_sqr())
        })
        .collect()
}

/// Fraction of non-DC spectral power with frequency in `[lo, hi)` where the
/// upper edge is clamped to Nyquist; a band reaching Nyquist includes the
/// Nyquist bin. Constant signals have no non-DC power and give 0.
pub fn high_freq_power(x: &[f64], fs: f64, band: (f64, f64)) -> Result<f64, RewardError> {
    if x.len() < 8 {
        return Err(RewardError::TooShort(x.len()));
    }
    let (lo, hi, _) = effective_band(fs, band)?;
    let nyquist = fs / 2.0;
    if x.iter().all(|&v| v == x[0]) {
        return Ok(0.0);
    }
    let spectrum = periodogram(x, fs);
    let total: f64 = spectrum.iter().map(|(_, p)| p).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let inside: f64 = spectrum
        .iter()
        .filter(|(f, _)| *f >= lo && (*f < hi || hi >= nyquist))
        .map(|(_, p)| p)
        .sum();
    Ok((inside / total).clamp(0.0, 1.0))
}

/// Mean absolute difference between two equal-length slices.
pub fn mae(x: &[f64], y: &[f64]) -> Result<f64, RewardError> {
    if x.len() != y.len() {
        return Err(RewardError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(RewardError::Empty);
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>() / x.len() as f64)
}

/// MAE between one channel of each set, pooled over trials and timesteps.
pub fn mae_channels(
    x: &TrialSet,
    x_channel: &str,
    y: &TrialSet,
    y_channel: &str,
) -> Result<f64, RewardError> {
    let xs = (x.n_trials(), x.n_steps());
    let ys = (y.n_trials(), y.n_steps());
    if xs != ys {
        return Err(RewardError::ShapeMismatch(xs, ys));
    }
    let xv = x.channel_values(x.channel_index(x_channel)?);
    let yv = y.channel_values(y.channel_index(y_channel)?);
    mae(&xv, &yv)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub param_value: f64,
    pub per_seed_values: Vec<f64>,
    pub mean: f64,
    pub ci95_lo: f64,
    pub ci95_hi: f64,
}

impl SweepPoint {
    pub fn half_width(&self) -> f64 {
        (self.ci95_hi - self.ci95_lo) / 2.0
    }
}

/// Two-sided 97.5% Student-t quantile for `df` degrees of freedom.
pub fn t_quantile_975(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("df >= 1")
        .inverse_cdf(0.975)
}

/// Mean and Student-t 95% interval per parameter value, sorted by parameter.
pub fn aggregate_sweep(points: &[(f64, Vec<f64>)]) -> Result<Vec<SweepPoint>, RewardError> {
    let mut sorted: Vec<&(f64, Vec<f64>)> = points.iter().collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in sorted.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(RewardError::DuplicateParam(w[0].0));
        }
    }
    sorted
        .into_iter()
        .map(|(param, seeds)| {
            let n = seeds.len();
            if n < 2 {
                return Err(RewardError::TooFewSeeds { param: *param, n });
            }
            let mean = seeds.iter().sum::<f64>() / n as f64;
            let var = seeds.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let half = t_quantile_975(n - 1) * var.sqrt() / (n as f64).sqrt();
            Ok(SweepPoint {
                param_value: *param,
                per_seed_values: seeds.clone(),
                mean,
                ci95_lo: mean - half,
                ci95_hi: mean + half,
            })
        })
        .collect()
}
