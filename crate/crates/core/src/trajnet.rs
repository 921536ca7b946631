//! TrajectoryNet: Gaussian angular-velocity profiles, their regression
//! from start/end poses, endpoint-constrained trajectory synthesis, and
//! the cumulative-MCL forecast H_c.
//!
//! A head movement's angular velocity on each axis is modeled as a single
//! Gaussian pulse A * exp(-(t - mu)^2 / (2 sigma^2)). Profiles are fitted
//! to measured movements by nonlinear least squares, an MLP regresses
//! them from the pose pair alone, and synthesis integrates the pulse with
//! the amplitude rescaled so the discrete integral meets the endpoint
//! exactly.

use crate::error::{Error, Result};
use crate::kinematics::{differentiate, HeadPose, TimedTrajectory, MODEL_RATE_HZ, WINDOW_LEN};
use crate::mclnet::MclNet;
use crate::metrics::nrmse;
use crate::nn::{
    l2_loss, softplus, AdamState, BatchNorm1d, Checkpoint, FullyConnected, Layer, Mode, Network,
    ParamSlot, Relu, Tensor,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const PROFILE_FIT_MAX_ITERS: usize = 50;
pub const PROFILE_FIT_TOL: f64 = 1e-6;
/// Width assigned to a degenerate (zero-displacement) profile.
pub const DEGENERATE_SIGMA_S: f64 = 0.1;
const HIDDEN_WIDTH: usize = 20;

/// One axis of a Gaussian angular-velocity profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianProfile {
    /// Peak angular velocity in deg/s; signed like the net displacement.
    pub amplitude: f64,
    /// Peak time in seconds from movement onset.
    pub center: f64,
    /// Width in seconds; always positive.
    pub width: f64,
}

impl GaussianProfile {
    pub fn zero() -> Self {
        GaussianProfile {
            amplitude: 0.0,
            center: 0.0,
            width: DEGENERATE_SIGMA_S,
        }
    }

    /// Velocity at time `t`.
    pub fn velocity(&self, t: f64) -> f64 {
        let z = (t - self.center) / self.width;
        self.amplitude * (-0.5 * z * z).exp()
    }
}

/// Result of fitting one axis: the profile, the residual NRMSE in
/// percent, and whether the input was degenerate (all-zero velocity).
#[derive(Debug, Clone, Copy)]
pub struct ProfileFit {
    pub profile: GaussianProfile,
    pub residual_nrmse: f64,
    pub degenerate: bool,
}

/// Solve a 3x3 linear system with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
        })?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for col in (0..3).rev() {
        let mut s = b[col];
        for k in col + 1..3 {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Some(x)
}

/// Fit a Gaussian pulse to one axis's 20 Hz velocity curve by
/// Gauss-Newton, initialized from the signed peak and the displacement-
/// matching width.
pub fn fit_profile(velocity: &[f64]) -> Result<ProfileFit> {
    if velocity.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "profile fit needs at least 3 samples, got {}",
            velocity.len()
        )));
    }
    if velocity.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite velocity sample".into()));
    }
    let dt = 1.0 / MODEL_RATE_HZ;
    let peak_idx = (0..velocity.len())
        .max_by(|&i, &j| velocity[i].abs().partial_cmp(&velocity[j].abs()).unwrap())
        .unwrap();
    let peak = velocity[peak_idx];
    if peak.abs() < 1e-12 {
        return Ok(ProfileFit {
            profile: GaussianProfile::zero(),
            residual_nrmse: 0.0,
            degenerate: true,
        });
    }
    // Trapezoidal net displacement sets the initial width.
    let displacement: f64 = dt
        * (velocity.iter().sum::<f64>() - 0.5 * (velocity[0] + velocity[velocity.len() - 1]));
    let mut a = peak;
    let mut mu = peak_idx as f64 * dt;
    let mut sigma = (displacement.abs() / (peak.abs() * (2.0 * std::f64::consts::PI).sqrt()))
        .max(dt / 2.0);

    let residual_norm = |a: f64, mu: f64, sigma: f64| -> f64 {
        velocity
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let z = (k as f64 * dt - mu) / sigma;
                let r = a * (-0.5 * z * z).exp() - v;
                r * r
            })
            .sum()
    };
    let mut prev = residual_norm(a, mu, sigma);
    for _ in 0..PROFILE_FIT_MAX_ITERS {
        // Normal equations J^T J d = -J^T r.
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (k, &v) in velocity.iter().enumerate() {
            let t = k as f64 * dt;
            let z = (t - mu) / sigma;
            let g = (-0.5 * z * z).exp();
            let r = a * g - v;
            let j = [g, a * g * z / sigma, a * g * z * z / sigma];
            for p in 0..3 {
                jtr[p] += j[p] * r;
                for q in 0..3 {
                    jtj[p][q] += j[p] * j[q];
                }
            }
        }
        // Levenberg damping keeps the step sane when J is rank deficient.
        for p in 0..3 {
            jtj[p][p] += 1e-9 * (1.0 + jtj[p][p]);
        }
        let Some(step) = solve3(jtj, [-jtr[0], -jtr[1], -jtr[2]]) else {
            break;
        };
        a += step[0];
        mu += step[1];
        sigma = (sigma + step[2]).max(dt / 4.0);
        let cur = residual_norm(a, mu, sigma);
        let rel = (prev - cur).abs() / prev.max(1e-30);
        prev = cur;
        if rel < PROFILE_FIT_TOL {
            break;
        }
    }
    let fitted: Vec<f64> = (0..velocity.len())
        .map(|k| {
            let z = (k as f64 * dt - mu) / sigma;
            a * (-0.5 * z * z).exp()
        })
        .collect();
    let residual_nrmse = nrmse(&fitted, velocity)?;
    Ok(ProfileFit {
        profile: GaussianProfile {
            amplitude: a,
            center: mu,
            width: sigma,
        },
        residual_nrmse,
        degenerate: false,
    })
}

/// Fit both axes of a 20 Hz movement trajectory; returns (pitch, yaw).
pub fn fit_profile_pair(traj: &TimedTrajectory) -> Result<[ProfileFit; 2]> {
    if (traj.sample_rate - MODEL_RATE_HZ).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "profile fitting requires {} Hz input, got {} Hz",
            MODEL_RATE_HZ, traj.sample_rate
        )));
    }
    let kin = differentiate(traj)?;
    let pitch: Vec<f64> = kin.velocity.iter().map(|v| v.0).collect();
    let yaw: Vec<f64> = kin.velocity.iter().map(|v| v.1).collect();
    Ok([fit_profile(&pitch)?, fit_profile(&yaw)?])
}

/// Build the 20 Hz trajectory whose velocity follows the profile pair,
/// with each axis's amplitude rescaled so the discrete trapezoidal
/// integral equals the required displacement exactly.
pub fn synthesize_trajectory(
    pair: &[GaussianProfile; 2],
    start: HeadPose,
    end: HeadPose,
) -> Result<TimedTrajectory> {
    for p in pair {
        if !(p.width > 0.0) || p.center < 0.0 || !p.amplitude.is_finite() {
            return Err(Error::InvalidInput(format!("invalid profile {p:?}")));
        }
    }
    let delta = [end.pitch - start.pitch, end.yaw - start.yaw];
    if delta == [0.0, 0.0] {
        return TimedTrajectory::new(MODEL_RATE_HZ, vec![start]);
    }
    let dt = 1.0 / MODEL_RATE_HZ;
    // Duration covers every moving axis out to 3 sigma past its peak.
    let t_e = pair
        .iter()
        .zip(&delta)
        .filter(|(_, &d)| d != 0.0)
        .map(|(p, _)| p.center + 3.0 * p.width)
        .fold(0.0f64, f64::max);
    let n = ((t_e / dt).ceil() as usize).max(1);
    // Unit-amplitude trapezoidal integrals fix the rescaled amplitudes.
    let mut scaled = [0.0f64; 2];
    for axis in 0..2 {
        if delta[axis] == 0.0 {
            continue; // zero displacement: amplitude normalized to zero
        }
        let p = &pair[axis];
        let shape = |k: usize| {
            let z = (k as f64 * dt - p.center) / p.width;
            (-0.5 * z * z).exp()
        };
        let unit: f64 =
            dt * ((0..=n).map(shape).sum::<f64>() - 0.5 * (shape(0) + shape(n)));
        if unit.abs() < 1e-12 {
            return Err(Error::InvalidInput(format!(
                "profile mass too small to reach displacement on axis {axis}"
            )));
        }
        scaled[axis] = delta[axis] / unit;
    }
    let mut poses = Vec::with_capacity(n + 1);
    let mut cur = [start.pitch, start.yaw];
    poses.push(start);
    for k in 1..=n {
        for axis in 0..2 {
            if delta[axis] == 0.0 {
                continue;
            }
            let p = &pair[axis];
            let v = |k: usize| {
                let z = (k as f64 * dt - p.center) / p.width;
                scaled[axis] * (-0.5 * z * z).exp()
            };
            cur[axis] += dt * 0.5 * (v(k - 1) + v(k));
        }
        poses.push(HeadPose::new(cur[0], cur[1]));
    }
    // Endpoint is exact up to float rounding; snap and assert.
    let last = poses.last_mut().unwrap();
    debug_assert!((last.pitch - end.pitch).abs() < 1e-6);
    debug_assert!((last.yaw - end.yaw).abs() < 1e-6);
    if (last.pitch - end.pitch).abs() > 1e-6 || (last.yaw - end.yaw).abs() > 1e-6 {
        return Err(Error::InvalidInput(
            "synthesized trajectory missed its endpoint".into(),
        ));
    }
    *last = end;
    TimedTrajectory::new(MODEL_RATE_HZ, poses)
}

/// Training example: a pose pair and the per-axis profiles fitted to the
/// measured movement between them.
#[derive(Debug, Clone)]
pub struct ProfileExample {
    pub start: HeadPose,
    pub end: HeadPose,
    pub profiles: [GaussianProfile; 2],
}

/// Training hyperparameters; defaults follow the published schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_drop_epoch: usize,
    pub lr_drop_factor: f64,
    pub weight_decay: f64,
}

impl Default for TrajTrainConfig {
    fn default() -> Self {
        TrajTrainConfig {
            epochs: 25,
            batch_size: 64,
            learning_rate: 1e-3,
            lr_drop_epoch: 15,
            lr_drop_factor: 0.1,
            weight_decay: 1e-5,
        }
    }
}

/// Per-dimension standardization statistics for the 4 inputs and the 6
/// (transformed) profile parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajStats {
    pub input_mean: [f64; 4],
    pub input_std: [f64; 4],
    pub target_mean: [f64; 6],
    pub target_std: [f64; 6],
}

/// MLP regressing (A, mu, sigma) per axis from (r_s, r_e - r_s).
///
/// The network works in standardized parameter space: targets are
/// standardized per dimension (widths first mapped through the inverse
/// softplus) and predictions are unstandardized at readout, with the
/// width passing back through a softplus so sigma > 0 by construction.
#[derive(Debug, Clone)]
pub struct TrajectoryNet {
    pub net: Network,
    pub stats: Option<TrajStats>,
}

/// Inverse of softplus: ln(e^y - 1), stable for small y.
fn inv_softplus(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        (y.exp_m1()).ln()
    }
}

fn mlp(rng: &mut ChaCha8Rng) -> Network {
    Network::new(vec![
        Layer::FullyConnected(FullyConnected::new(4, HIDDEN_WIDTH, rng)),
        Layer::BatchNorm1d(BatchNorm1d::new(HIDDEN_WIDTH)),
        Layer::Relu(Relu::new()),
        Layer::FullyConnected(FullyConnected::new(HIDDEN_WIDTH, HIDDEN_WIDTH, rng)),
        Layer::BatchNorm1d(BatchNorm1d::new(HIDDEN_WIDTH)),
        Layer::Relu(Relu::new()),
        Layer::FullyConnected(FullyConnected::new(HIDDEN_WIDTH, 6, rng)),
    ])
}

fn input_vec(start: HeadPose, end: HeadPose) -> [f64; 4] {
    [
        start.pitch,
        start.yaw,
        end.pitch - start.pitch,
        end.yaw - start.yaw,
    ]
}

/// Transformed target space: widths through the inverse softplus.
fn target_vec(ex: &ProfileExample) -> [f64; 6] {
    [
        ex.profiles[0].amplitude,
        ex.profiles[0].center,
        inv_softplus(ex.profiles[0].width),
        ex.profiles[1].amplitude,
        ex.profiles[1].center,
        inv_softplus(ex.profiles[1].width),
    ]
}

impl TrajectoryNet {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TrajectoryNet {
            net: mlp(&mut rng),
            stats: None,
        }
    }

    fn stats(&self) -> Result<&TrajStats> {
        self.stats
            .as_ref()
            .ok_or_else(|| Error::State("TrajectoryNet has no statistics (untrained)".into()))
    }

    fn pack_inputs(&self, pairs: &[(HeadPose, HeadPose)]) -> Result<Tensor> {
        let s = self.stats()?;
        let mut x = Tensor::zeros(pairs.len(), 4, 1);
        for (b, &(start, end)) in pairs.iter().enumerate() {
            let v = input_vec(start, end);
            for (c, val) in v.iter().enumerate() {
                x.set(b, c, 0, (val - s.input_mean[c]) / s.input_std[c]);
            }
        }
        Ok(x)
    }

    /// Predict the profile pair for a movement; amplitude signs are
    /// forced to the displacement sign (zero displacement → zero
    /// amplitude) and centers clamped to be non-negative.
    pub fn predict_profile(
        &mut self,
        start: HeadPose,
        end: HeadPose,
    ) -> Result<[GaussianProfile; 2]> {
        let x = self.pack_inputs(&[(start, end)])?;
        let z = self.net.forward(&x, Mode::Eval)?;
        let s = self.stats()?;
        let raw: Vec<f64> = (0..6)
            .map(|c| s.target_mean[c] + s.target_std[c] * z.get(0, c, 0))
            .collect();
        let delta = [end.pitch - start.pitch, end.yaw - start.yaw];
        let mut out = [GaussianProfile::zero(); 2];
        for axis in 0..2 {
            let a = raw[3 * axis];
            let mu = raw[3 * axis + 1];
            let sigma = softplus(raw[3 * axis + 2]);
            out[axis] = GaussianProfile {
                amplitude: if delta[axis] == 0.0 {
                    0.0
                } else {
                    a.abs().copysign(delta[axis])
                },
                center: mu.max(0.0),
                width: sigma,
            };
        }
        Ok(out)
    }

    /// Input/target standardization statistics over a dataset.
    pub fn compute_stats(dataset: &[ProfileExample]) -> TrajStats {
        let n = dataset.len() as f64;
        let mut im = [0.0; 4];
        let mut iq = [0.0; 4];
        let mut tm = [0.0; 6];
        let mut tq = [0.0; 6];
        for ex in dataset {
            let x = input_vec(ex.start, ex.end);
            let y = target_vec(ex);
            for c in 0..4 {
                im[c] += x[c];
                iq[c] += x[c] * x[c];
            }
            for c in 0..6 {
                tm[c] += y[c];
                tq[c] += y[c] * y[c];
            }
        }
        // Variance-free dimensions fall back to a scale-appropriate std
        // so standardization stays well conditioned.
        let finish = |sum: f64, sq: f64| {
            let mean = sum / n;
            let std = ((sq / n - mean * mean).max(0.0)).sqrt();
            (mean, if std > 1e-6 { std } else { mean.abs().max(1.0) })
        };
        let mut stats = TrajStats {
            input_mean: [0.0; 4],
            input_std: [1.0; 4],
            target_mean: [0.0; 6],
            target_std: [1.0; 6],
        };
        for c in 0..4 {
            let (m, s) = finish(im[c], iq[c]);
            stats.input_mean[c] = m;
            stats.input_std[c] = s;
        }
        for c in 0..6 {
            let (m, s) = finish(tm[c], tq[c]);
            stats.target_mean[c] = m;
            stats.target_std[c] = s;
        }
        stats
    }

    /// Standardized-target tensor for a batch of example indices.
    fn pack_targets(&self, batch: &[&ProfileExample]) -> Result<Tensor> {
        let s = self.stats()?;
        let mut t = Tensor::zeros(batch.len(), 6, 1);
        for (b, ex) in batch.iter().enumerate() {
            let y = target_vec(ex);
            for c in 0..6 {
                t.set(b, c, 0, (y[c] - s.target_mean[c]) / s.target_std[c]);
            }
        }
        Ok(t)
    }

    pub fn param_slots(&mut self) -> Vec<ParamSlot<'_>> {
        self.net.param_slots()
    }

    /// Train on fitted profiles; returns the per-epoch mean loss.
    pub fn train(
        &mut self,
        dataset: &[ProfileExample],
        cfg: &TrajTrainConfig,
        shuffle_seed: u64,
    ) -> Result<Vec<f64>> {
        if dataset.is_empty() {
            return Err(Error::InvalidInput("empty training dataset".into()));
        }
        self.stats = Some(Self::compute_stats(dataset));
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
        let mut adam = AdamState::new();
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        let mut history = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            let lr = if epoch >= cfg.lr_drop_epoch {
                cfg.learning_rate * cfg.lr_drop_factor
            } else {
                cfg.learning_rate
            };
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            let mut batches = 0.0;
            for chunk in order.chunks(cfg.batch_size) {
                let refs: Vec<&ProfileExample> = chunk.iter().map(|&i| &dataset[i]).collect();
                let pairs: Vec<(HeadPose, HeadPose)> =
                    refs.iter().map(|ex| (ex.start, ex.end)).collect();
                let x = self.pack_inputs(&pairs)?;
                let targets = self.pack_targets(&refs)?;
                self.net.zero_grads();
                let z = self.net.forward(&x, Mode::Train)?;
                let (loss, grad) = l2_loss(&z, &targets);
                self.net.backward(&grad)?;
                adam.step(self.net.param_slots(), lr, cfg.weight_decay);
                epoch_loss += loss;
                batches += 1.0;
            }
            history.push(epoch_loss / batches);
        }
        Ok(history)
    }

    /// Train-mode loss for gradient checking.
    pub fn training_loss(&mut self, batch: &[ProfileExample]) -> Result<f64> {
        let refs: Vec<&ProfileExample> = batch.iter().collect();
        let pairs: Vec<(HeadPose, HeadPose)> =
            batch.iter().map(|ex| (ex.start, ex.end)).collect();
        let x = self.pack_inputs(&pairs)?;
        let targets = self.pack_targets(&refs)?;
        let z = self.net.forward(&x, Mode::Train)?;
        Ok(l2_loss(&z, &targets).0)
    }

    /// End-to-end finite-difference gradient check of the regression
    /// loss.
    pub fn gradient_check(&mut self, batch: &[ProfileExample]) -> Result<f64> {
        let refs: Vec<&ProfileExample> = batch.iter().collect();
        let pairs: Vec<(HeadPose, HeadPose)> =
            batch.iter().map(|ex| (ex.start, ex.end)).collect();
        let x = self.pack_inputs(&pairs)?;
        let targets = self.pack_targets(&refs)?;
        self.net.zero_grads();
        let z = self.net.forward(&x, Mode::Train)?;
        let (_, grad) = l2_loss(&z, &targets);
        self.net.backward(&grad)?;
        let analytic: Vec<Vec<f64>> = self
            .net
            .param_slots()
            .iter()
            .map(|s| s.grads.to_vec())
            .collect();
        let h = crate::nn::gradcheck::GRADCHECK_STEP;
        let mut max_err: f64 = 0.0;
        for (si, slot_grads) in analytic.iter().enumerate() {
            for ei in 0..slot_grads.len() {
                self.net.param_slots()[si].values[ei] += h;
                let lp = self.training_loss(batch)?;
                self.net.param_slots()[si].values[ei] -= 2.0 * h;
                let lm = self.training_loss(batch)?;
                self.net.param_slots()[si].values[ei] += h;
                let fd = (lp - lm) / (2.0 * h);
                let g = slot_grads[ei];
                let err = (fd - g).abs() / fd.abs().max(g.abs()).max(1e-3);
                max_err = max_err.max(err);
            }
        }
        Ok(max_err)
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let s = self.stats()?;
        let mut ckpt = Checkpoint::new();
        ckpt.export_network("trajectory_net", &self.net);
        ckpt.insert("input_stats/mean", vec![4], s.input_mean.to_vec());
        ckpt.insert("input_stats/std", vec![4], s.input_std.to_vec());
        ckpt.insert("target_stats/mean", vec![6], s.target_mean.to_vec());
        ckpt.insert("target_stats/std", vec![6], s.target_std.to_vec());
        Ok(ckpt)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let mut net = TrajectoryNet::new(0);
        ckpt.import_network("trajectory_net", &mut net.net)?;
        let arr = |name: &str, len: usize| -> Result<Vec<f64>> {
            let e = ckpt.get(name)?;
            if e.values.len() != len {
                return Err(Error::Format(format!(
                    "entry '{name}' must have {len} values"
                )));
            }
            Ok(e.values.clone())
        };
        let im = arr("input_stats/mean", 4)?;
        let is = arr("input_stats/std", 4)?;
        let tm = arr("target_stats/mean", 6)?;
        let ts = arr("target_stats/std", 6)?;
        net.stats = Some(TrajStats {
            input_mean: std::array::from_fn(|i| im[i]),
            input_std: std::array::from_fn(|i| is[i]),
            target_mean: std::array::from_fn(|i| tm[i]),
            target_std: std::array::from_fn(|i| ts[i]),
        });
        Ok(net)
    }
}

/// Pre-hoc cumulative MCL H_c for a movement, in MCL-seconds: synthesize
/// the predicted trajectory and integrate MCLNet's estimate over it
/// (sum x dt). A zero-displacement movement has H_c = 0 by convention.
pub fn cumulative_mcl(
    start: HeadPose,
    end: HeadPose,
    traj_net: &mut TrajectoryNet,
    mcl_net: &mut MclNet,
) -> Result<f64> {
    if start == end {
        return Ok(0.0);
    }
    let pair = traj_net.predict_profile(start, end)?;
    let traj = synthesize_trajectory(&pair, start, end)?;
    cumulative_mcl_over(&traj, mcl_net)
}

/// Time integral of MCLNet's estimate over a given 20 Hz trajectory.
/// Short trajectories are padded at the end pose up to the model's
/// window length; only the original samples enter the integral.
pub fn cumulative_mcl_over(traj: &TimedTrajectory, mcl_net: &mut MclNet) -> Result<f64> {
    let n = traj.len();
    if n < 2 {
        return Ok(0.0);
    }
    let mut padded = traj.clone();
    while padded.len() < WINDOW_LEN {
        padded.poses.push(*traj.poses.last().unwrap());
    }
    let est = mcl_net.estimate_sequence(&padded)?;
    let dt = 1.0 / MODEL_RATE_HZ;
    Ok(est.mcl.values[..n].iter().sum::<f64>() * dt)
}
