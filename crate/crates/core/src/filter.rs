//! Butterworth IIR design as cascaded biquads, plus forward-backward filtering.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("cutoff {cutoff} Hz must lie strictly inside (0, {nyquist}) Hz")]
    InvalidCutoff { cutoff: f64, nyquist: f64 },
    #[error("bandpass cutoffs must be ascending, got {lo} >= {hi}")]
    UnorderedBand { lo: f64, hi: f64 },
    #[error("filter order must be even and >= 2, got {0}")]
    OddOrder(usize),
    #[error("sample rate must be positive, got {0}")]
    InvalidSampleRate(f64),
    #[error("signal of length {len} too short: zero-phase filtering needs more than {needed} samples")]
    TooShort { len: usize, needed: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterKind {
    Lowpass,
    Highpass,
    Bandpass,
}

/// One second-order section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiquadSection {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl BiquadSection {
    /// Largest pole magnitude.
    pub fn pole_radius(&self) -> f64 {
        let disc = self.a1 * self.a1 - 4.0 * self.a2;
        if disc < 0.0 {
            // complex pair: |p|^2 = a2
            self.a2.sqrt()
        } else {
            let r = disc.sqrt();
            ((-self.a1 + r) / 2.0).abs().max(((-self.a1 - r) / 2.0).abs())
        }
    }

    pub fn is_stable(&self) -> bool {
        self.pole_radius() < 1.0
    }

    pub fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// Complex response at normalized angular frequency `w` (rad/sample) as `(re, im)`.
    pub fn response(&self, w: f64) -> (f64, f64) {
        // H(e^{jw}) = (b0 + b1 e^{-jw} + b2 e^{-2jw}) / (1 + a1 e^{-jw} + a2 e^{-2jw})
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let nr = self.b0 + self.b1 * c1 + self.b2 * c2;
        let ni = self.b1 * s1 + self.b2 * s2;
        let dr = 1.0 + self.a1 * c1 + self.a2 * c2;
        let di = self.a1 * s1 + self.a2 * s2;
        let den = dr * dr + di * di;
        ((nr * dr + ni * di) / den, (ni * dr - nr * di) / den)
    }

    /// Steady-state transposed direct-form II state for a unit step input.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b2 - self.a2 * g;
        let z1 = self.b1 - self.a1 * g + z2;
        [z1, z2]
    }

    #[inline]
    fn tick(&self, x: f64, z: &mut [f64; 2]) -> f64 {
        let y = self.b0 * x + z[0];
        z[0] = self.b1 * x - self.a1 * y + z[1];
        z[1] = self.b2 * x - self.a2 * y;
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiquadCascade {
    pub sections: Vec<BiquadSection>,
    pub description: String,
}

impl BiquadCascade {
    /// Total filter order (two per section).
    pub fn order(&self) -> usize {
        2 * self.sections.len()
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(BiquadSection::is_stable)
    }

    /// Magnitude response at `freq_hz` for sample rate `fs`.
    pub fn magnitude(&self, freq_hz: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / fs;
        self.sections
            .iter()
            .map(|s| {
                let (re, im) = s.response(w);
                re.hypot(im)
            })
            .product()
    }

    pub fn magnitude_db(&self, freq_hz: f64, fs: f64) -> f64 {
        20.0 * self.magnitude(freq_hz, fs).log10()
    }

    /// Single causal pass from zero initial state.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            let mut z = [0.0; 2];
            for v in y.iter_mut() {
                *v = s.tick(*v, &mut z);
            }
        }
        y
    }

    /// Causal pass starting from the steady state for a constant input `x0`.
    fn filter_from_steady(&self, x: &mut [f64], x0: f64) {
        let mut gain = 1.0;
        for s in &self.sections {
            let zi = s.step_state();
            let mut z = [zi[0] * gain * x0, zi[1] * gain * x0];
            for v in x.iter_mut() {
                *v = s.tick(*v, &mut z);
            }
            gain *= s.dc_gain();
        }
    }

    /// Minimum signal length accepted by [`filter_zero_phase`] is one more than this.
    pub fn min_pad_len(&self) -> usize {
        3 * self.order()
    }

    /// Samples for the slowest pole to decay by `e^-6`.
    pub fn settle_len(&self) -> usize {
        let r = self
            .sections
            .iter()
            .map(BiquadSection::pole_radius)
            .fold(0.0f64, f64::max);
        if r <= 0.0 {
            return 0;
        }
        (-6.0 / r.ln()).ceil() as usize
    }

    /// Edge padding used for a signal of length `n`: long enough for start-up
    /// transients to settle, at least `3 × order`, never more than `n − 1`.
    pub fn pad_len(&self, n: usize) -> usize {
        self.settle_len()
            .max(self.min_pad_len())
            .min(n.saturating_sub(1))
    }
}

fn check_cutoff(cutoff: f64, fs: f64) -> Result<(), FilterError> {
    let nyquist = fs / 2.0;
    if !(cutoff > 0.0 && cutoff < nyquist) {
        return Err(FilterError::InvalidCutoff { cutoff, nyquist });
    }
    Ok(())
}

/// Damping terms `2 sin((2k+1)π / 2N)` of the analog prototype pole pairs.
fn prototype_damping(order: usize) -> impl Iterator<Item = f64> {
    (0..order / 2).map(move |k| 2.0 * ((2 * k + 1) as f64 * PI / (2 * order) as f64).sin())
}

fn lowpass_sections(order: usize, cutoff: f64, fs: f64) -> Vec<BiquadSection> {
    // prewarped bilinear transform, K = tan(π fc / fs)
    let k = (PI * cutoff / fs).tan();
    let k2 = k * k;
    prototype_damping(order)
        .map(|d| {
            let norm = 1.0 / (1.0 + d * k + k2);
            let b0 = k2 * norm;
            BiquadSection {
                b0,
                b1: 2.0 * b0,
                b2: b0,
                a1: 2.0 * (k2 - 1.0) * norm,
                a2: (1.0 - d * k + k2) * norm,
            }
        })
        .collect()
}

fn highpass_sections(order: usize, cutoff: f64, fs: f64) -> Vec<BiquadSection> {
    let k = (PI * cutoff / fs).tan();
    let k2 = k * k;
    prototype_damping(order)
        .map(|d| {
            let norm = 1.0 / (1.0 + d * k + k2);
            BiquadSection {
                b0: norm,
                b1: -2.0 * norm,
                b2: norm,
                a1: 2.0 * (k2 - 1.0) * norm,
                a2: (1.0 - d * k + k2) * norm,
            }
        })
        .collect()
}

/// Designs a Butterworth filter of the given (even) order.
///
/// A bandpass is realized as an order-`order` highpass at the lower cutoff
/// cascaded with an order-`order` lowpass at the upper cutoff, so a 4th-order
/// bandpass has four sections.
pub fn design_butterworth(
    order: usize,
    kind: FilterKind,
    cutoffs: &[f64],
    fs: f64,
) -> Result<BiquadCascade, FilterError> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(FilterError::InvalidSampleRate(fs));
    }
    if order < 2 || order % 2 != 0 {
        return Err(FilterError::OddOrder(order));
    }
    let nyquist = fs / 2.0;
    let sections = match kind {
        FilterKind::Lowpass | FilterKind::Highpass => {
            let fc = *cutoffs.first().ok_or(FilterError::InvalidCutoff {
                cutoff: f64::NAN,
                nyquist,
            })?;
            check_cutoff(fc, fs)?;
            if kind == FilterKind::Lowpass {
                lowpass_sections(order, fc, fs)
            } else {
                highpass_sections(order, fc, fs)
            }
        }
        FilterKind::Bandpass => {
            let (lo, hi) = match cutoffs {
                [lo, hi] => (*lo, *hi),
                _ => {
                    return Err(FilterError::InvalidCutoff {
                        cutoff: f64::NAN,
                        nyquist,
                    })
                }
            };
            check_cutoff(lo, fs)?;
            check_cutoff(hi, fs)?;
            if lo >= hi {
                return Err(FilterError::UnorderedBand { lo, hi });
            }
            let mut s = highpass_sections(order, lo, fs);
            s.extend(lowpass_sections(order, hi, fs));
            s
        }
    };
    let band = cutoffs
        .iter()
        .map(|c| format!("{c}"))
        .collect::<Vec<_>>()
        .join("-");
    let name = match kind {
        FilterKind::Lowpass => "lowpass",
        FilterKind::Highpass => "highpass",
        FilterKind::Bandpass => "bandpass",
    };
    Ok(BiquadCascade {
        sections,
        description: format!("butterworth order {order} {name} {band} Hz @{fs} Hz"),
    })
}

/// Zero-phase forward-backward filtering.
///
/// The signal is extended at both ends by mirror reflection about its end
/// samples (see [`BiquadCascade::pad_len`]) and each pass starts from the
/// filter's steady state for the first padded sample, so constants pass
/// through a lowpass unchanged and edge transients decay inside the padding.
pub fn filter_zero_phase(cascade: &BiquadCascade, x: &[f64]) -> Result<Vec<f64>, FilterError> {
    let min_pad = cascade.min_pad_len();
    if x.len() <= min_pad {
        return Err(FilterError::TooShort {
            len: x.len(),
            needed: min_pad,
        });
    }
    let n = x.len();
    let pad = cascade.pad_len(n);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| x[n - 1 - i]));

    let x0 = ext[0];
    cascade.filter_from_steady(&mut ext, x0);
    ext.reverse();
    let y0 = ext[0];
    cascade.filter_from_steady(&mut ext, y0);
    ext.reverse();
    Ok(ext[pad..pad + n].to_vec())
}
