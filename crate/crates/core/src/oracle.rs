//! Synthetic biophysical oracle: a fully known torque-balance simulator
//! that generates paired head motion, ground-truth MCL, and raw EMG
//! following the pilot-study protocol. Every learning module in the crate
//! is verified against it.
//!
//! The ground-truth map mirrors the model structure with closed forms:
//! passive torque is a gravity-style sinusoid with a pitch offset (the
//! neck's neutral pose sits slightly forward, producing the asymmetric
//! pitch effect), active torque is the balance I* a - T_p*, and the
//! torque-to-MCL map is linear with a saturation cap.

use crate::dsp::{upsample_linear, SosFilter};
use crate::emg::{MclSequence, RawEmgRecord, EMG_RATE_HZ};
use crate::error::{Error, Result};
use crate::kinematics::{differentiate, HeadPose, StudyField, TimedTrajectory, MODEL_RATE_HZ};
use crate::trajnet::{synthesize_trajectory, GaussianProfile};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Pilot anchor grid: pitch {0, ±10, ±20, ±30} x yaw {0, ±20..±50}.
pub fn pilot_anchors() -> Vec<HeadPose> {
    let mut out = Vec::with_capacity(63);
    for p in [-30.0, -20.0, -10.0, 0.0, 10.0, 20.0, 30.0] {
        for y in [-50.0, -40.0, -30.0, -20.0, 0.0, 20.0, 30.0, 40.0, 50.0] {
            out.push(HeadPose::new(p, y));
        }
    }
    out
}

/// Evaluation anchor grid: pitch {±5, ±25} x yaw {±15, ±45}; disjoint
/// from the pilot grid by construction.
pub fn eval_anchors() -> Vec<HeadPose> {
    let mut out = Vec::with_capacity(16);
    for p in [-25.0, -5.0, 5.0, 25.0] {
        for y in [-45.0, -15.0, 15.0, 45.0] {
            out.push(HeadPose::new(p, y));
        }
    }
    out
}

/// The 8 surrounding movement deltas of the protocol.
pub const MOVEMENT_DELTAS: [(f64, f64); 8] = [
    (-35.0, -25.0),
    (-35.0, 0.0),
    (-35.0, 25.0),
    (0.0, -25.0),
    (0.0, 25.0),
    (35.0, -25.0),
    (35.0, 0.0),
    (35.0, 25.0),
];

/// Stationary MCL targets the oracle is calibrated against.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationTargets {
    /// MCL at the neutral pose (0, 0).
    pub origin: f64,
    /// MCL at the most demanding grid pose (30, 50).
    pub extreme: f64,
    /// Mean MCL over the 63-anchor grid.
    pub grid_mean: f64,
    /// MCL at (+30, 0); fitted with low weight, honored qualitatively.
    pub pitch_up: f64,
    /// MCL at (-30, 0); fitted with low weight, honored qualitatively.
    pub pitch_down: f64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        CalibrationTargets {
            origin: 0.17,
            extreme: 0.68,
            grid_mean: 0.32,
            pitch_up: 0.49,
            pitch_down: 0.27,
        }
    }
}

/// Fully specified ground-truth simulator.
#[derive(Debug, Clone)]
pub struct OracleConfig {
    /// Normalized moment of inertia I*.
    pub inertia: f64,
    /// Pitch gravity gain (torque units).
    pub g_p: f64,
    /// Neutral pitch offset in degrees; the source of pitch asymmetry.
    pub p0_deg: f64,
    /// Yaw elasticity gain (torque units).
    pub k_y: f64,
    /// Torque-to-MCL weights.
    pub w_p: f64,
    pub w_y: f64,
    /// MCL at zero torque.
    pub baseline: f64,
    /// Saturation cap on MCL.
    pub cap: f64,
    /// Main sequence: movement width sigma = sigma_0 + c * |amplitude|.
    pub sigma0_s: f64,
    pub sigma_per_deg: f64,
    /// Relative jitter applied to sigma per movement (+-fraction).
    pub velocity_jitter: f64,
    /// RMS of the additive low-pass velocity noise, deg/s.
    pub velocity_noise_dps: f64,
    /// AM depth of the EMG carrier.
    pub emg_modulation_depth: f64,
    /// Electrode gain asymmetry range [low, high], sampled per session.
    pub channel_gain_range: (f64, f64),
    /// Baseline drift amplitude in mV and maximum frequency in Hz.
    pub drift_amplitude_mv: f64,
    pub drift_max_hz: f64,
    pub seed: u64,
    calibrated: bool,
}

impl OracleConfig {
    /// Uncalibrated defaults; stationary-map gains are placeholders until
    /// [`calibrate`] fills them in.
    pub fn new(seed: u64) -> Self {
        OracleConfig {
            inertia: 1.0,
            g_p: 1.0,
            p0_deg: 10.0,
            k_y: 1.0,
            w_p: 5e-4,
            w_y: 5e-4,
            baseline: 0.05,
            cap: 0.95,
            sigma0_s: 0.05,
            sigma_per_deg: 0.0035,
            velocity_jitter: 0.1,
            velocity_noise_dps: 1.5,
            emg_modulation_depth: 1.0,
            channel_gain_range: (0.5, 2.0),
            drift_amplitude_mv: 0.02,
            drift_max_hz: 0.8,
            seed,
            calibrated: false,
        }
    }

    pub fn is_calibrated(&self) -> bool {
        self.calibrated
    }

    fn validate(&self) -> Result<()> {
        let ok = self.inertia > 0.0
            && self.sigma0_s > 0.0
            && self.sigma_per_deg > 0.0
            && self.baseline > 0.0
            && self.baseline < 0.3
            && self.g_p > 0.0
            && self.k_y > 0.0
            && self.w_p > 0.0
            && self.w_y > 0.0
            && self.cap > self.baseline
            && self.cap <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("invalid oracle config".into()))
        }
    }

    /// Noise-free main-sequence velocity profiles for a movement, before
    /// per-session jitter and velocity noise are applied.
    pub fn nominal_profiles(&self, start: HeadPose, end: HeadPose) -> [GaussianProfile; 2] {
        let delta = [end.pitch - start.pitch, end.yaw - start.yaw];
        std::array::from_fn(|axis| {
            if delta[axis] == 0.0 {
                GaussianProfile::zero()
            } else {
                let sigma = self.sigma0_s + self.sigma_per_deg * delta[axis].abs();
                GaussianProfile {
                    amplitude: delta[axis].signum(),
                    center: 3.0 * sigma,
                    width: sigma,
                }
            }
        })
    }
}

/// Ground-truth passive torque T_p* = (-g_p sin(p + p0), -k_y sin(y)).
pub fn passive_torque(cfg: &OracleConfig, pose: HeadPose) -> (f64, f64) {
    (
        -cfg.g_p * (pose.pitch + cfg.p0_deg).to_radians().sin(),
        -cfg.k_y * pose.yaw.to_radians().sin(),
    )
}

/// Ground-truth MCL at a kinematic state: E*(I* a - T_p*) with a linear
/// capped torque-to-MCL map. Always in [baseline, cap].
pub fn oracle_mcl(cfg: &OracleConfig, pose: HeadPose, accel: (f64, f64)) -> f64 {
    let tp = passive_torque(cfg, pose);
    let ta = (
        cfg.inertia * accel.0 - tp.0,
        cfg.inertia * accel.1 - tp.1,
    );
    (cfg.baseline + cfg.w_p * ta.0.abs() + cfg.w_y * ta.1.abs()).min(cfg.cap)
}

/// Ground-truth MCL along a trajectory (central-difference accelerations).
pub fn mcl_along(cfg: &OracleConfig, traj: &TimedTrajectory) -> Result<MclSequence> {
    let kin = differentiate(traj)?;
    let values = kin
        .poses
        .iter()
        .zip(&kin.acceleration)
        .map(|(&p, &a)| oracle_mcl(cfg, p, a))
        .collect();
    Ok(MclSequence {
        sample_rate: traj.sample_rate,
        values,
    })
}

/// Fit the stationary-map constants {g_p, p_0, k_y, b} (with w_p, w_y
/// fixed scale factors) to the published stationary MCL anchors by
/// exhaustive search over the narrow feasible region: for each (p0, a_p,
/// a_y) candidate, b is set by the origin target and all residuals are
/// scored. The three primary targets must fit within 0.02.
pub fn calibrate(seed: u64, targets: &CalibrationTargets) -> Result<OracleConfig> {
    let anchors = pilot_anchors();
    let mut best: Option<(f64, f64, f64, f64, f64)> = None; // score, a_p, p0, a_y, b
    let mut p0 = 8.0;
    while p0 <= 12.5 {
        let rad = |d: f64| d.to_radians();
        let s0 = rad(p0).sin();
        let s_up = rad(30.0 + p0).sin();
        let s_down = rad(30.0 - p0).sin().abs();
        let s_ext = s_up; // pitch term at (30, 50)
        let sy50 = rad(50.0).sin();
        // Grid means of the two angular terms over the 63 anchors.
        let (mut mp, mut my) = (0.0, 0.0);
        for a in &anchors {
            mp += rad(a.pitch + p0).sin().abs();
            my += rad(a.yaw).sin().abs();
        }
        mp /= anchors.len() as f64;
        my /= anchors.len() as f64;

        let mut a_p = 0.60;
        while a_p <= 1.30 {
            let b = targets.origin - a_p * s0;
            if b > 0.004 && b < 0.3 {
                let mut a_y = 0.02;
                while a_y <= 0.40 {
                    let r_ext = b + a_p * s_ext + a_y * sy50 - targets.extreme;
                    let r_mean = b + a_p * mp + a_y * my - targets.grid_mean;
                    // Example tolerances: origin exact by construction,
                    // extreme within 0.01, all primaries within 0.02.
                    if r_ext.abs() <= 0.009 && r_mean.abs() <= 0.019 {
                        let r_up = b + a_p * s_up - targets.pitch_up;
                        let r_down = b + a_p * s_down - targets.pitch_down;
                        let score = r_ext * r_ext + r_mean * r_mean
                            + 0.05 * (r_up * r_up + r_down * r_down)
                            - 1e-4 * a_y; // prefer a stronger yaw effect
                        if best.is_none_or(|(s, ..)| score < s) {
                            best = Some((score, a_p, p0, a_y, b));
                        }
                    }
                    a_y += 0.002;
                }
            }
            a_p += 0.002;
        }
        p0 += 0.05;
    }
    let Some((_, a_p, p0, a_y, b)) = best else {
        return Err(Error::Calibration(
            "no stationary map fits the anchors within tolerance".into(),
        ));
    };
    let mut cfg = OracleConfig::new(seed);
    cfg.p0_deg = p0;
    cfg.baseline = b;
    cfg.g_p = a_p / cfg.w_p;
    cfg.k_y = a_y / cfg.w_y;
    cfg.calibrated = true;
    cfg.validate()?;

    // Verify the fit the way callers will observe it.
    let check = |pose: HeadPose, target: f64, tol: f64, what: &str| -> Result<()> {
        let v = oracle_mcl(&cfg, pose, (0.0, 0.0));
        if (v - target).abs() > tol {
            return Err(Error::Calibration(format!(
                "{what}: got {v:.4}, target {target} (tol {tol})"
            )));
        }
        Ok(())
    };
    check(HeadPose::new(0.0, 0.0), targets.origin, 0.02, "origin")?;
    check(HeadPose::new(30.0, 50.0), targets.extreme, 0.02, "extreme")?;
    let mean = anchors
        .iter()
        .map(|&a| oracle_mcl(&cfg, a, (0.0, 0.0)))
        .sum::<f64>()
        / anchors.len() as f64;
    if (mean - targets.grid_mean).abs() > 0.02 {
        return Err(Error::Calibration(format!(
            "grid mean: got {mean:.4}, target {}",
            targets.grid_mean
        )));
    }
    let up = oracle_mcl(&cfg, HeadPose::new(30.0, 0.0), (0.0, 0.0));
    let down = oracle_mcl(&cfg, HeadPose::new(-30.0, 0.0), (0.0, 0.0));
    if up <= down {
        return Err(Error::Calibration(
            "pitch asymmetry not honored by fit".into(),
        ));
    }
    Ok(cfg)
}

/// Generate one natural head movement: per-axis Gaussian velocity with
/// main-sequence width (jittered), endpoint-exact amplitude, and additive
/// zero-integral low-pass velocity noise.
pub fn gen_movement(
    cfg: &OracleConfig,
    start: HeadPose,
    end: HeadPose,
    rng: &mut ChaCha8Rng,
) -> Result<TimedTrajectory> {
    let delta = [end.pitch - start.pitch, end.yaw - start.yaw];
    if delta == [0.0, 0.0] {
        return TimedTrajectory::new(MODEL_RATE_HZ, vec![start]);
    }
    let mut pair = [GaussianProfile::zero(), GaussianProfile::zero()];
    for axis in 0..2 {
        if delta[axis] == 0.0 {
            continue;
        }
        let jitter = 1.0 + cfg.velocity_jitter * rng.gen_range(-1.0..1.0);
        let sigma = (cfg.sigma0_s + cfg.sigma_per_deg * delta[axis].abs()) * jitter;
        pair[axis] = GaussianProfile {
            amplitude: delta[axis].signum(),
            center: 3.0 * sigma,
            width: sigma,
        };
    }
    let mut traj = synthesize_trajectory(&pair, start, end)?;
    if traj.len() < 3 || cfg.velocity_noise_dps <= 0.0 {
        return Ok(traj);
    }
    // Low-pass velocity noise whose trapezoidal integral is zero, so the
    // endpoint stays exact.
    let n = traj.len();
    let white: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            [
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
            ]
        })
        .collect();
    let dt = 1.0 / MODEL_RATE_HZ;
    for axis in 0..2 {
        let raw: Vec<f64> = white.iter().map(|w| w[axis]).collect();
        let mut smooth = crate::dsp::moving_mean(&raw, 3);
        // Trapezoid weights: 0.5 at the ends, 1 inside.
        let wsum = (n - 1) as f64;
        let wmean: f64 = (smooth.iter().sum::<f64>()
            - 0.5 * (smooth[0] + smooth[n - 1]))
            / wsum;
        for v in &mut smooth {
            *v -= wmean;
        }
        let rms = (smooth.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        if rms < 1e-12 {
            continue;
        }
        let scale = cfg.velocity_noise_dps / rms;
        // Integrate the perturbation onto the poses; net displacement 0.
        let mut acc = 0.0;
        for k in 1..n {
            acc += dt * 0.5 * (smooth[k - 1] + smooth[k]) * scale;
            if axis == 0 {
                traj.poses[k].pitch += acc;
            } else {
                traj.poses[k].yaw += acc;
            }
        }
    }
    Ok(traj)
}

/// Fixed channel mixing encoding muscle function. Order
/// [L-SCM, R-SCM, L-SC, R-SC]: SCMs rotate the head to the opposite side
/// and flex it down; SCs rotate to the same side and extend it up.
fn channel_shares(direction: (f64, f64)) -> [f64; 4] {
    let (dp, dy) = direction;
    let left = if dy < 0.0 { 1.0 } else { 0.0 };
    let right = if dy > 0.0 { 1.0 } else { 0.0 };
    let down = if dp < 0.0 { 1.0 } else { 0.0 };
    let up = if dp > 0.0 { 1.0 } else { 0.0 };
    const KAPPA: f64 = 0.8;
    let mut s = [
        1.0 + KAPPA * (right + down), // L-SCM: rightward rotation, flexion
        1.0 + KAPPA * (left + down),  // R-SCM: leftward rotation, flexion
        1.0 + KAPPA * (left + up),    // L-SC: leftward rotation, extension
        1.0 + KAPPA * (right + up),   // R-SC: rightward rotation, extension
    ];
    let total: f64 = s.iter().sum();
    for v in &mut s {
        *v /= total;
    }
    s
}

/// Synthesize a 4-channel raw EMG record from ground-truth MCL: per
/// channel, a band-limited unit-variance carrier amplitude-modulated by
/// that channel's activation share, plus slow sinusoidal baseline drift.
pub fn gen_emg(
    cfg: &OracleConfig,
    mcl: &MclSequence,
    direction: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> Result<RawEmgRecord> {
    if (mcl.sample_rate - MODEL_RATE_HZ).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "gen_emg expects {} Hz MCL, got {} Hz",
            MODEL_RATE_HZ, mcl.sample_rate
        )));
    }
    if mcl.values.is_empty() {
        return Err(Error::InvalidInput("empty MCL sequence".into()));
    }
    let factor = (EMG_RATE_HZ / MODEL_RATE_HZ) as usize;
    let activation = upsample_linear(&mcl.values, factor);
    let n = activation.len();
    let shares = channel_shares(direction);
    let band = SosFilter::butterworth_bandpass(4, 20.0, 450.0, EMG_RATE_HZ)?;
    let mut channels: [Vec<f64>; 4] = Default::default();
    for (c, ch) in channels.iter_mut().enumerate() {
        let gain = rng.gen_range(cfg.channel_gain_range.0..cfg.channel_gain_range.1);
        let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let carrier = band.filter(&white);
        let var = carrier.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let scale = if var > 0.0 { var.sqrt().recip() } else { 0.0 };
        let drift_hz = rng.gen_range(0.1..cfg.drift_max_hz);
        let drift_phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let drift_amp = cfg.drift_amplitude_mv * rng.gen_range(0.5..1.0);
        // Shares average 0.25, so x4 keeps the mean channel envelope at
        // the MCL scale.
        let share = 4.0 * shares[c] * cfg.emg_modulation_depth;
        *ch = (0..n)
            .map(|k| {
                let t = k as f64 / EMG_RATE_HZ;
                gain * activation[k] * share * carrier[k] * scale
                    + drift_amp * (std::f64::consts::TAU * drift_hz * t + drift_phase).sin()
            })
            .collect();
    }
    RawEmgRecord::new(EMG_RATE_HZ, channels)
}

/// Which protocol a dataset replicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Training data: the 63-anchor pilot grid.
    Pilot,
    /// Held-out data: the 16-anchor evaluation grid.
    Eval,
}

impl Protocol {
    pub fn anchors(&self) -> Vec<HeadPose> {
        match self {
            Protocol::Pilot => pilot_anchors(),
            Protocol::Eval => eval_anchors(),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Protocol::Pilot => "train",
            Protocol::Eval => "eval",
        }
    }
}

/// One recorded session: 2 s stationary at the anchor, a movement to the
/// target, then 1 s stationary at the target.
#[derive(Debug, Clone)]
pub struct Session {
    pub anchor: HeadPose,
    pub target: HeadPose,
    /// Sample index where the movement segment begins (end of the 2 s
    /// stationary anchor segment).
    pub movement_start: usize,
    /// Sample index one past the movement's final sample.
    pub movement_end: usize,
    pub trajectory: TimedTrajectory,
    pub mcl: MclSequence,
    pub emg: RawEmgRecord,
    /// RNG stream used for this session (for the manifest).
    pub stream: u64,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub protocol: Protocol,
    pub seed: u64,
    pub sessions: Vec<Session>,
}

pub const STATIONARY_ANCHOR_S: f64 = 2.0;
pub const STATIONARY_TARGET_S: f64 = 1.0;

/// Valid (anchor, target) pairs: the 8 surrounding deltas filtered to
/// the study field.
pub fn session_conditions(protocol: Protocol) -> Vec<(HeadPose, HeadPose)> {
    let field = StudyField::default();
    let mut out = Vec::new();
    for anchor in protocol.anchors() {
        for (dp, dy) in MOVEMENT_DELTAS {
            let target = HeadPose::new(anchor.pitch + dp, anchor.yaw + dy);
            if field.contains(&target) {
                out.push((anchor, target));
            }
        }
    }
    out
}

/// Generate one session deterministically on its own RNG stream.
pub fn gen_session(
    cfg: &OracleConfig,
    anchor: HeadPose,
    target: HeadPose,
    stream: u64,
) -> Result<Session> {
    if !cfg.calibrated {
        return Err(Error::State("oracle config is not calibrated".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let n_anchor = (STATIONARY_ANCHOR_S * MODEL_RATE_HZ) as usize;
    let n_target = (STATIONARY_TARGET_S * MODEL_RATE_HZ) as usize;
    let movement = gen_movement(cfg, anchor, target, &mut rng)?;
    let mut poses = vec![anchor; n_anchor];
    let movement_start = poses.len();
    poses.extend_from_slice(&movement.poses);
    let movement_end = poses.len();
    poses.extend(std::iter::repeat_n(target, n_target));
    let trajectory = TimedTrajectory::new(MODEL_RATE_HZ, poses)?;
    let mcl = mcl_along(cfg, &trajectory)?;
    let direction = (target.pitch - anchor.pitch, target.yaw - anchor.yaw);
    let emg = gen_emg(cfg, &mcl, direction, &mut rng)?;
    Ok(Session {
        anchor,
        target,
        movement_start,
        movement_end,
        trajectory,
        mcl,
        emg,
        stream,
    })
}

/// Generate the full dataset for a protocol; bit-reproducible per seed.
pub fn gen_dataset(cfg: &OracleConfig, protocol: Protocol) -> Result<SyntheticDataset> {
    if !cfg.calibrated {
        return Err(Error::State("oracle config is not calibrated".into()));
    }
    // Streams are offset per protocol so pilot and eval noise differ.
    let base = match protocol {
        Protocol::Pilot => 1u64,
        Protocol::Eval => 100_000u64,
    };
    let sessions = session_conditions(protocol)
        .into_iter()
        .enumerate()
        .map(|(i, (anchor, target))| gen_session(cfg, anchor, target, base + i as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticDataset {
        protocol,
        seed: cfg.seed,
        sessions,
    })
}
