//! Synthetic two-link planar arm driven by antagonistic muscle pairs.
//!
//! Muscles are first-order activation lags producing torque
//! `moment_arm · activation · max_force`; no force-length or force-velocity
//! curves. The rigid-body part is the standard planar two-link model
//! (uniform rods, relative elbow angle) integrated with semi-implicit Euler,
//! with viscous joint damping treated implicitly in the velocity update.
//!
//! [`generate_reaches`] runs a joint-space servo from a start to a target
//! posture and logs kinematics and activations at 200 Hz plus pseudo-EMG
//! (activation-modulated band-limited noise) at 30 kHz.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::{design_butterworth, FilterKind};
use crate::trial_data::{ChannelKind, ChannelSpec, TrialDataError, TrialSet};

#[derive(Debug, Error)]
pub enum ArmError {
    #[error("invalid arm parameters: {0}")]
    InvalidParams(String),
    #[error("invalid reach script: {0}")]
    InvalidScript(String),
    #[error("integration diverged (non-finite state)")]
    NonFiniteState,
    #[error(transparent)]
    Data(#[from] TrialDataError),
}

pub const SHOULDER_FLEXOR: usize = 0;
pub const SHOULDER_EXTENSOR: usize = 1;
pub const ELBOW_FLEXOR: usize = 2;
pub const ELBOW_EXTENSOR: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmParams {
    /// Upper arm, forearm (m).
    pub link_lengths: [f64; 2],
    /// Upper arm, forearm (kg).
    pub masses: [f64; 2],
    /// Shoulder flexor/extensor, elbow flexor/extensor (m).
    pub moment_arms: [f64; 4],
    /// Same order as `moment_arms` (N), each within [0.2, 1.2].
    pub max_forces: [f64; 4],
    /// Activation time constant (s).
    pub tau_act: f64,
    pub sim_dt: f64,
    pub ctrl_dt: f64,
    /// Downward gravity (m/s²); 0 disables it.
    pub gravity: f64,
    /// Viscous joint damping (N·m·s/rad).
    pub damping: f64,
    /// `[lo, hi]` per joint (rad).
    pub joint_limits: [[f64; 2]; 2],
}

impl Default for ArmParams {
    fn default() -> Self {
        Self {
            link_lengths: [0.1, 0.1],
            masses: [0.05, 0.05],
            moment_arms: [0.06, 0.06, 0.07, 0.07],
            max_forces: [1.2, 1.2, 1.0, 1.0],
            tau_act: 0.01,
            sim_dt: 0.00125,
            ctrl_dt: 0.0025,
            gravity: 0.0,
            damping: 0.01,
            joint_limits: [[-1.5, 2.0], [0.0, 2.6]],
        }
    }
}

impl ArmParams {
    pub fn substeps(&self) -> Result<usize, ArmError> {
        let ratio = self.ctrl_dt / self.sim_dt;
        let n = ratio.round();
        if !(n >= 1.0 && (ratio - n).abs() < 1e-9 * ratio) {
            return Err(ArmError::InvalidParams(format!(
                "ctrl_dt {} is not an integer multiple of sim_dt {}",
                self.ctrl_dt, self.sim_dt
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<(), ArmError> {
        let bad = |m: &str| Err(ArmError::InvalidParams(m.to_string()));
        if !(self.sim_dt > 0.0 && self.ctrl_dt > 0.0) {
            return bad("sim_dt and ctrl_dt must be positive");
        }
        self.substeps()?;
        if !(self.tau_act > 0.0) {
            return bad("tau_act must be positive");
        }
        if self.max_forces.iter().any(|f| !(0.2..=1.2).contains(f)) {
            return bad("max_forces must lie within [0.2, 1.2] N");
        }
        if self
            .link_lengths
            .iter()
            .chain(&self.masses)
            .chain(&self.moment_arms)
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return bad("lengths, masses and moment arms must be positive");
        }
        if !(self.damping >= 0.0 && self.gravity.is_finite()) {
            return bad("damping must be >= 0 and gravity finite");
        }
        if self.joint_limits.iter().any(|[lo, hi]| !(lo < hi)) {
            return bad("joint limits must be ascending");
        }
        Ok(())
    }

    /// Peak torque of each muscle (`moment_arm · max_force`).
    pub fn torque_capacity(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.moment_arms[i] * self.max_forces[i])
    }

    /// Joint torques produced by activations `a`.
    pub fn joint_torques(&self, a: &[f64; 4]) -> [f64; 2] {
        let cap = self.torque_capacity();
        [
            cap[SHOULDER_FLEXOR] * a[SHOULDER_FLEXOR] - cap[SHOULDER_EXTENSOR] * a[SHOULDER_EXTENSOR],
            cap[ELBOW_FLEXOR] * a[ELBOW_FLEXOR] - cap[ELBOW_EXTENSOR] * a[ELBOW_EXTENSOR],
        ]
    }

    fn inertia_terms(&self) -> (f64, f64, f64) {
        let [l1, l2] = self.link_lengths;
        let [m1, m2] = self.masses;
        let (lc1, lc2) = (l1 / 2.0, l2 / 2.0);
        let (i1, i2) = (m1 * l1 * l1 / 12.0, m2 * l2 * l2 / 12.0);
        let a1 = i1 + i2 + m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2);
        let a2 = m2 * l1 * lc2;
        let a3 = i2 + m2 * lc2 * lc2;
        (a1, a2, a3)
    }

    /// Joint-space inertia matrix `[[m11, m12], [m12, m22]]`.
    pub fn mass_matrix(&self, q: &[f64; 2]) -> [[f64; 2]; 2] {
        let (a1, a2, a3) = self.inertia_terms();
        let c2 = q[1].cos();
        [[a1 + 2.0 * a2 * c2, a3 + a2 * c2], [a3 + a2 * c2, a3]]
    }

    /// Coriolis/centrifugal plus gravity generalized forces.
    pub fn bias_forces(&self, q: &[f64; 2], qdot: &[f64; 2]) -> [f64; 2] {
        let (_, a2, _) = self.inertia_terms();
        let h = a2 * q[1].sin();
        let [l1, l2] = self.link_lengths;
        let [m1, m2] = self.masses;
        let g = self.gravity;
        let c12 = (q[0] + q[1]).cos();
        let g1 = (m1 * l1 / 2.0 + m2 * l1) * g * q[0].cos() + m2 * l2 / 2.0 * g * c12;
        let g2 = m2 * l2 / 2.0 * g * c12;
        [
            -h * qdot[1] * (2.0 * qdot[0] + qdot[1]) + g1,
            h * qdot[0] * qdot[0] + g2,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    pub q: [f64; 2],
    pub qdot: [f64; 2],
    pub activations: [f64; 4],
}

impl ArmState {
    pub fn at_rest(q: [f64; 2]) -> Self {
        Self {
            q,
            qdot: [0.0; 2],
            activations: [0.0; 4],
        }
    }

    pub fn kinetic_energy(&self, p: &ArmParams) -> f64 {
        let m = p.mass_matrix(&self.q);
        let v = self.qdot;
        0.5 * (m[0][0] * v[0] * v[0] + 2.0 * m[0][1] * v[0] * v[1] + m[1][1] * v[1] * v[1])
    }

    fn is_finite(&self) -> bool {
        self.q
            .iter()
            .chain(&self.qdot)
            .chain(&self.activations)
            .all(|v| v.is_finite())
    }
}

fn solve2(m: [[f64; 2]; 2], b: [f64; 2]) -> [f64; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [
        (b[0] * m[1][1] - m[0][1] * b[1]) / det,
        (m[0][0] * b[1] - m[1][0] * b[0]) / det,
    ]
}

/// One `sim_dt` substep; activation update is the exact first-order response.
fn substep(s: &ArmState, u: &[f64; 4], p: &ArmParams) -> ArmState {
    let decay = (-p.sim_dt / p.tau_act).exp();
    let activations: [f64; 4] =
        std::array::from_fn(|i| (s.activations[i] + (u[i] - s.activations[i]) * (1.0 - decay)).clamp(0.0, 1.0));
    let tau = p.joint_torques(&activations);
    let m = p.mass_matrix(&s.q);
    let bias = p.bias_forces(&s.q, &s.qdot);
    let dt = p.sim_dt;
    // (M + b·dt·I) v' = M v + dt (τ − bias)
    let lhs = [
        [m[0][0] + p.damping * dt, m[0][1]],
        [m[1][0], m[1][1] + p.damping * dt],
    ];
    let rhs = [
        m[0][0] * s.qdot[0] + m[0][1] * s.qdot[1] + dt * (tau[0] - bias[0]),
        m[1][0] * s.qdot[0] + m[1][1] * s.qdot[1] + dt * (tau[1] - bias[1]),
    ];
    let mut qdot = solve2(lhs, rhs);
    let mut q = [s.q[0] + dt * qdot[0], s.q[1] + dt * qdot[1]];
    for j in 0..2 {
        let [lo, hi] = p.joint_limits[j];
        if q[j] < lo || q[j] > hi {
            q[j] = q[j].clamp(lo, hi);
            qdot[j] = 0.0;
        }
    }
    ArmState {
        q,
        qdot,
        activations,
    }
}

/// Advances the arm by one control period `ctrl_dt` under excitation `u`.
pub fn step(state: &ArmState, u: &[f64; 4], p: &ArmParams) -> Result<ArmState, ArmError> {
    let n = p.substeps()?;
    let u: [f64; 4] = std::array::from_fn(|i| u[i].clamp(0.0, 1.0));
    let mut s = *state;
    for _ in 0..n {
        s = substep(&s, &u, p);
    }
    if !s.is_finite() {
        return Err(ArmError::NonFiniteState);
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReachScript {
    pub start_q: [f64; 2],
    pub target_q: [f64; 2],
    /// Trial length (s).
    pub duration: f64,
    pub trials: usize,
    /// Scales excitation noise and per-trial target jitter; 0 makes trials identical.
    pub noise: f64,
    pub seed: u64,
    /// Rate of the logged kinematics and activations (Hz).
    pub sample_rate_hz: f64,
    /// Rate of the pseudo-EMG (Hz).
    pub emg_rate_hz: f64,
}

impl Default for ReachScript {
    fn default() -> Self {
        Self {
            start_q: [0.2, 0.6],
            target_q: [0.5, 1.2],
            duration: 0.3,
            trials: 46,
            noise: 0.3,
            seed: 0,
            sample_rate_hz: 200.0,
            emg_rate_hz: 30_000.0,
        }
    }
}

impl ReachScript {
    pub fn validate(&self, p: &ArmParams) -> Result<(), ArmError> {
        let bad = |m: &str| Err(ArmError::InvalidScript(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be >= 1");
        }
        if !(self.duration >= p.ctrl_dt) {
            return bad("duration must be >= ctrl_dt");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be finite and >= 0");
        }
        if !(self.sample_rate_hz > 0.0 && self.emg_rate_hz >= self.sample_rate_hz) {
            return bad("need 0 < sample_rate_hz <= emg_rate_hz");
        }
        let per_sample = 1.0 / (self.sample_rate_hz * p.ctrl_dt);
        if (per_sample - per_sample.round()).abs() > 1e-9 || per_sample.round() < 1.0 {
            return bad("1/sample_rate_hz must be an integer multiple of ctrl_dt");
        }
        Ok(())
    }

    /// Logged samples per trial.
    pub fn n_samples(&self) -> usize {
        (self.duration * self.sample_rate_hz).round() as usize
    }

    pub fn n_emg_samples(&self) -> usize {
        (self.duration * self.emg_rate_hz).round() as usize
    }
}

/// Generated trials: kinematics and activations at `sample_rate_hz`, raw
/// pseudo-EMG at `emg_rate_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub kinematics: TrialSet,
    pub activations: TrialSet,
    pub raw_emg: TrialSet,
    /// Per-trial reach targets after jitter.
    pub targets: Vec<[f64; 2]>,
}

impl SynthDataset {
    /// Kinematics and activations side by side.
    pub fn combined(&self) -> TrialSet {
        self.kinematics
            .concat_channels(&self.activations)
            .expect("kinematics and activations share shape")
    }
}

pub const KINEMATIC_CHANNELS: [&str; 4] = ["q_shoulder", "q_elbow", "qdot_shoulder", "qdot_elbow"];
pub const ACTIVATION_CHANNELS: [&str; 4] =
    ["a_shoulder_flexor", "a_shoulder_extensor", "a_biceps", "a_triceps"];
pub const EMG_CHANNELS: [&str; 2] = ["emg_biceps", "emg_triceps"];

/// Minimum-jerk position, velocity and acceleration at phase `s = t/T`.
fn min_jerk(start: f64, end: f64, t: f64, period: f64) -> (f64, f64, f64) {
    let s = (t / period).clamp(0.0, 1.0);
    let d = end - start;
    if t >= period {
        return (end, 0.0, 0.0);
    }
    let pos = start + d * (10.0 * s.powi(3) - 15.0 * s.powi(4) + 6.0 * s.powi(5));
    let vel = d * (30.0 * s.powi(2) - 60.0 * s.powi(3) + 30.0 * s.powi(4)) / period;
    let acc = d * (60.0 * s - 180.0 * s.powi(2) + 120.0 * s.powi(3)) / (period * period);
    (pos, vel, acc)
}

/// Servo bandwidth (rad/s) of the reach controller.
const SERVO_OMEGA: f64 = 30.0;
/// Fraction of the reach spent moving; the rest is holding.
const MOVE_FRACTION: f64 = 0.7;
/// Antagonist co-contraction as a fraction of the weaker muscle's capacity.
const COCONTRACTION: f64 = 0.08;
/// Correlation time of excitation noise (s).
const NOISE_TIME: f64 = 0.02;
/// Per-trial target jitter (rad) at `noise = 1`.
const TARGET_JITTER: f64 = 0.15;

/// Excitations producing net joint torques `tau` over a co-contraction floor.
fn torque_to_excitation(tau: [f64; 2], p: &ArmParams) -> [f64; 4] {
    let cap = p.torque_capacity();
    let mut u = [0.0; 4];
    for j in 0..2 {
        let (f, e) = (2 * j, 2 * j + 1);
        let floor = COCONTRACTION * cap[f].min(cap[e]);
        u[f] = (floor + tau[j].max(0.0)) / cap[f];
        u[e] = (floor + (-tau[j]).max(0.0)) / cap[e];
    }
    u
}

struct TrialLog {
    target: [f64; 2],
    kin: Vec<[f64; 4]>,
    act: Vec<[f64; 4]>,
    /// Activations at every sim substep, starting at t = 0.
    act_fine: Vec<[f64; 4]>,
}

fn simulate_trial(script: &ReachScript, p: &ArmParams, rng: &mut ChaCha8Rng) -> Result<TrialLog, ArmError> {
    let substeps = p.substeps()?;
    let ctrl_per_sample = (1.0 / (script.sample_rate_hz * p.ctrl_dt)).round() as usize;
    let n_samples = script.n_samples();
    let n_ctrl = n_samples * ctrl_per_sample;

    let jitter: [f64; 2] =
        std::array::from_fn(|_| script.noise * TARGET_JITTER * rng.sample::<f64, _>(StandardNormal));
    let target = [script.target_q[0] + jitter[0], script.target_q[1] + jitter[1]];
    let move_time = MOVE_FRACTION * script.duration;
    let (kp, kd) = (SERVO_OMEGA * SERVO_OMEGA, 2.0 * SERVO_OMEGA);
    let rho = (-p.ctrl_dt / NOISE_TIME).exp();
    let innov = (1.0 - rho * rho).sqrt();
    let mut noise = [0.0f64; 4];

    // start at rest with the co-contraction floor already active
    let mut state = ArmState::at_rest(script.start_q);
    state.activations = torque_to_excitation([0.0, 0.0], p);

    let mut log = TrialLog {
        target,
        kin: Vec::with_capacity(n_samples),
        act: Vec::with_capacity(n_samples),
        act_fine: Vec::with_capacity(n_ctrl * substeps + 1),
    };
    log.act_fine.push(state.activations);
    for k in 0..n_ctrl {
        if k % ctrl_per_sample == 0 {
            log.kin.push([state.q[0], state.q[1], state.qdot[0], state.qdot[1]]);
            log.act.push(state.activations);
        }
        let t = k as f64 * p.ctrl_dt;
        let mut acc = [0.0; 2];
        for j in 0..2 {
            let (qd, vd, ad) = min_jerk(script.start_q[j], target[j], t, move_time);
            acc[j] = ad + kd * (vd - state.qdot[j]) + kp * (qd - state.q[j]);
        }
        let m = p.mass_matrix(&state.q);
        let bias = p.bias_forces(&state.q, &state.qdot);
        let tau = [
            m[0][0] * acc[0] + m[0][1] * acc[1] + bias[0] + p.damping * state.qdot[0],
            m[1][0] * acc[0] + m[1][1] * acc[1] + bias[1] + p.damping * state.qdot[1],
        ];
        let mut u = torque_to_excitation(tau, p);
        for (ui, ni) in u.iter_mut().zip(noise.iter_mut()) {
            *ni = rho * *ni + innov * rng.sample::<f64, _>(StandardNormal);
            *ui = (*ui + script.noise * 0.2 * *ni).clamp(0.0, 1.0);
        }
        for _ in 0..substeps {
            state = substep(&state, &u, p);
            log.act_fine.push(state.activations);
        }
        if !state.is_finite() {
            return Err(ArmError::NonFiniteState);
        }
    }
    Ok(log)
}

/// Band of the pseudo-EMG carrier (Hz).
const EMG_CARRIER_BAND: [f64; 2] = [60.0, 400.0];
/// Additive white measurement noise relative to the unit-RMS carrier.
const EMG_FLOOR: f64 = 0.02;

fn pseudo_emg(
    act_fine: &[[f64; 4]],
    muscle: usize,
    script: &ReachScript,
    p: &ArmParams,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let n = script.n_emg_samples();
    let burn_in = (0.1 * script.emg_rate_hz) as usize;
    let band = design_butterworth(4, FilterKind::Bandpass, &EMG_CARRIER_BAND, script.emg_rate_hz)
        .expect("carrier band valid below Nyquist");
    let white: Vec<f64> = (0..n + burn_in)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let carrier = band.filter(&white);
    let carrier = &carrier[burn_in..];
    let rms = (carrier.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    (0..n)
        .map(|i| {
            // linear interpolation of the substep activation trace
            let pos = i as f64 / script.emg_rate_hz / p.sim_dt;
            let k = (pos.floor() as usize).min(act_fine.len() - 1);
            let next = (k + 1).min(act_fine.len() - 1);
            let frac = pos - k as f64;
            let a = act_fine[k][muscle] * (1.0 - frac) + act_fine[next][muscle] * frac;
            a * carrier[i] / rms + EMG_FLOOR * rng.sample::<f64, _>(StandardNormal)
        })
        .collect()
}

/// Simulates `script.trials` seeded reaches. Trial `i` draws from its own
/// ChaCha stream, so results do not depend on thread scheduling.
pub fn generate_reaches(script: &ReachScript, p: &ArmParams) -> Result<SynthDataset, ArmError> {
    p.validate()?;
    script.validate(p)?;
    let trials: Vec<(TrialLog, [Vec<f64>; 2])> = (0..script.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
            rng.set_stream(i as u64);
            let log = simulate_trial(script, p, &mut rng)?;
            let emg = [
                pseudo_emg(&log.act_fine, ELBOW_FLEXOR, script, p, &mut rng),
                pseudo_emg(&log.act_fine, ELBOW_EXTENSOR, script, p, &mut rng),
            ];
            Ok((log, emg))
        })
        .collect::<Result<_, ArmError>>()?;

    let kin_series: Vec<Vec<Vec<f64>>> = trials
        .iter()
        .map(|(log, _)| (0..4).map(|c| log.kin.iter().map(|r| r[c]).collect()).collect())
        .collect();
    let act_series: Vec<Vec<Vec<f64>>> = trials
        .iter()
        .map(|(log, _)| (0..4).map(|c| log.act.iter().map(|r| r[c]).collect()).collect())
        .collect();
    let targets = trials.iter().map(|(log, _)| log.target).collect();
    let emg_series: Vec<Vec<Vec<f64>>> = trials.into_iter().map(|(_, e)| e.to_vec()).collect();

    let kin_channels = vec![
        ChannelSpec::new(KINEMATIC_CHANNELS[0], ChannelKind::JointAngle, "rad"),
        ChannelSpec::new(KINEMATIC_CHANNELS[1], ChannelKind::JointAngle, "rad"),
        ChannelSpec::new(KINEMATIC_CHANNELS[2], ChannelKind::JointVelocity, "rad/s"),
        ChannelSpec::new(KINEMATIC_CHANNELS[3], ChannelKind::JointVelocity, "rad/s"),
    ];
    let act_channels = ACTIVATION_CHANNELS
        .iter()
        .map(|n| ChannelSpec::new(*n, ChannelKind::MuscleActivation, "normalized"))
        .collect();
    let emg_channels = EMG_CHANNELS
        .iter()
        .map(|n| ChannelSpec::new(*n, ChannelKind::RawEmg, "volts"))
        .collect();
    Ok(SynthDataset {
        kinematics: TrialSet::from_series(kin_channels, script.sample_rate_hz, &kin_series)?,
        activations: TrialSet::from_series(act_channels, script.sample_rate_hz, &act_series)?,
        raw_emg: TrialSet::from_series(emg_channels, script.emg_rate_hz, &emg_series)?,
        targets,
    })
}
