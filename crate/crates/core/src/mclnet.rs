//! MCLNet: estimates muscle contraction level from head motion windows.
//!
//! Structure: a passive-torque network maps the pose sequence to a
//! pose-dependent torque; active torque is the balance I * alpha - T_p;
//! a second network maps active torque to MCL. The moment of inertia is
//! log-parameterized so it stays positive, and the output head is a
//! softplus so MCL is strictly positive.

use crate::emg::MclSequence;
use crate::error::{Error, Result};
use crate::kinematics::{
    differentiate, windows_with_stride, MotionWindow, TimedTrajectory, CENTER_LEN, CENTER_OFFSET,
    MODEL_RATE_HZ, WINDOW_LEN, WINDOW_STRIDE,
};
use crate::nn::{
    l2_loss, sigmoid, softplus, AdamState, BatchNorm1d, Checkpoint, Conv1d, FullyConnected,
    Layer, MaxPool1d, Mode, Network, ParamSlot, Relu, Tensor,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const HIDDEN_WIDTH: usize = 20;
pub const CONV_KERNEL: usize = 3;

/// Per-feature standardization statistics stored with the parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputStats {
    pub pose_mean: [f64; 2],
    pub pose_std: [f64; 2],
    pub accel_mean: [f64; 2],
    pub accel_std: [f64; 2],
}

impl InputStats {
    fn validate(&self) -> Result<()> {
        if self.pose_std.iter().chain(&self.accel_std).any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidInput(
                "standardization stds must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One training example: an input window and the measured MCL for its
/// central 4 samples.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub window: MotionWindow,
    pub targets: [f64; CENTER_LEN],
}

/// Training hyperparameters; defaults follow the published schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MclTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_drop_epoch: usize,
    pub lr_drop_factor: f64,
    pub weight_decay: f64,
}

impl Default for MclTrainConfig {
    fn default() -> Self {
        MclTrainConfig {
            epochs: 20,
            batch_size: 64,
            learning_rate: 1e-3,
            lr_drop_epoch: 10,
            lr_drop_factor: 0.1,
            weight_decay: 5e-4,
        }
    }
}

/// Sequence estimate with per-sample boundary flags: the first/last
/// samples not covered by any window center are filled with the nearest
/// prediction and flagged.
#[derive(Debug, Clone)]
pub struct SequenceEstimate {
    pub mcl: MclSequence,
    pub boundary: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct MclNet {
    pub passive_torque_net: Network,
    pub torque_to_mcl_net: Network,
    /// I = exp(log_inertia); kept as a length-1 array so it shares the
    /// optimizer path with network parameters.
    pub log_inertia: Vec<f64>,
    pub grad_log_inertia: Vec<f64>,
    pub input_stats: Option<InputStats>,
    // Cached activations from the last train-mode forward.
    cache: Option<(Tensor, Tensor)>, // (pre-softplus head, standardized accel)
}

fn passive_torque_net(rng: &mut ChaCha8Rng) -> Network {
    Network::new(vec![
        Layer::Conv1d(Conv1d::new(2, HIDDEN_WIDTH, CONV_KERNEL, rng)),
        Layer::BatchNorm1d(BatchNorm1d::new(HIDDEN_WIDTH)),
        Layer::Relu(Relu::new()),
        Layer::Conv1d(Conv1d::new(HIDDEN_WIDTH, HIDDEN_WIDTH, CONV_KERNEL, rng)),
        Layer::BatchNorm1d(BatchNorm1d::new(HIDDEN_WIDTH)),
        Layer::Relu(Relu::new()),
        Layer::Conv1d(Conv1d::new(HIDDEN_WIDTH, 2, CONV_KERNEL, rng)),
        Layer::BatchNorm1d(BatchNorm1d::new(2)),
    ])
}

fn torque_to_mcl_net(rng: &mut ChaCha8Rng) -> Network {
    Network::new(vec![
        Layer::Conv1d(Conv1d::new(2, HIDDEN_WIDTH, CONV_KERNEL, rng)),
        Layer::BatchNorm1d(BatchNorm1d::new(HIDDEN_WIDTH)),
        Layer::Relu(Relu::new()),
        Layer::Conv1d(Conv1d::new(HIDDEN_WIDTH, HIDDEN_WIDTH, CONV_KERNEL, rng)),
        Layer::BatchNorm1d(BatchNorm1d::new(HIDDEN_WIDTH)),
        Layer::Relu(Relu::new()),
        Layer::MaxPool1d(MaxPool1d::new()),
        Layer::Conv1d(Conv1d::new(HIDDEN_WIDTH, HIDDEN_WIDTH, CONV_KERNEL, rng)),
        Layer::BatchNorm1d(BatchNorm1d::new(HIDDEN_WIDTH)),
        Layer::Relu(Relu::new()),
        Layer::FullyConnected(FullyConnected::new(HIDDEN_WIDTH, 1, rng)),
    ])
}

impl MclNet {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MclNet {
            passive_torque_net: passive_torque_net(&mut rng),
            torque_to_mcl_net: torque_to_mcl_net(&mut rng),
            log_inertia: vec![0.0],
            grad_log_inertia: vec![0.0],
            input_stats: None,
            cache: None,
        }
    }

    pub fn inertia(&self) -> f64 {
        self.log_inertia[0].exp()
    }

    pub fn set_input_stats(&mut self, stats: InputStats) -> Result<()> {
        stats.validate()?;
        self.input_stats = Some(stats);
        Ok(())
    }

    fn stats(&self) -> Result<&InputStats> {
        self.input_stats
            .as_ref()
            .ok_or_else(|| Error::State("MCLNet has no input statistics (untrained)".into()))
    }

    /// Pack windows into (B,2,T) pose and acceleration tensors.
    fn pack(windows: &[&MotionWindow]) -> Result<(Tensor, Tensor)> {
        let b = windows.len();
        let mut pose = Tensor::zeros(b, 2, WINDOW_LEN);
        let mut accel = Tensor::zeros(b, 2, WINDOW_LEN);
        for (i, w) in windows.iter().enumerate() {
            for t in 0..WINDOW_LEN {
                if !w.poses[t].is_finite()
                    || !w.acceleration[t].0.is_finite()
                    || !w.acceleration[t].1.is_finite()
                {
                    return Err(Error::InvalidInput("non-finite window sample".into()));
                }
                pose.set(i, 0, t, w.poses[t].pitch);
                pose.set(i, 1, t, w.poses[t].yaw);
                accel.set(i, 0, t, w.acceleration[t].0);
                accel.set(i, 1, t, w.acceleration[t].1);
            }
        }
        Ok((pose, accel))
    }

    fn standardize(&self, pose: &Tensor, accel: &Tensor) -> Result<(Tensor, Tensor)> {
        let s = self.stats()?;
        let mut xp = pose.clone();
        let mut xa = accel.clone();
        for b in 0..pose.batch {
            for axis in 0..2 {
                for t in 0..pose.time {
                    let i = xp.idx(b, axis, t);
                    xp.data[i] = (xp.data[i] - s.pose_mean[axis]) / s.pose_std[axis];
                    xa.data[i] = (xa.data[i] - s.accel_mean[axis]) / s.accel_std[axis];
                }
            }
        }
        Ok((xp, xa))
    }

    /// Forward over standardized inputs. Returns (MCL outputs (B,1,C),
    /// active torque tensor).
    fn forward_standardized(
        &mut self,
        xp: &Tensor,
        xa: &Tensor,
        mode: Mode,
    ) -> Result<(Tensor, Tensor)> {
        let tp = self.passive_torque_net.forward(xp, mode)?;
        let inertia = self.inertia();
        let mut ta = xa.clone();
        for (t, p) in ta.data.iter_mut().zip(&tp.data) {
            *t = inertia * *t - p;
        }
        let head = self.torque_to_mcl_net.forward(&ta, mode)?;
        let out = head.map(softplus);
        if mode == Mode::Train {
            self.cache = Some((head, xa.clone()));
        }
        Ok((out, ta))
    }

    /// Backward from dL/doutput; accumulates gradients in both networks
    /// and in log_inertia.
    fn backward(&mut self, grad_out: &Tensor) -> Result<()> {
        let (head, xa) = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward without cached forward".into()))?;
        let mut gy = grad_out.clone();
        for (g, h) in gy.data.iter_mut().zip(&head.data) {
            *g *= sigmoid(*h);
        }
        let g_ta = self.torque_to_mcl_net.backward(&gy)?;
        // ta = I * xa - tp with I = exp(log_inertia).
        let inertia = self.inertia();
        let mut g_inertia = 0.0;
        for (g, x) in g_ta.data.iter().zip(&xa.data) {
            g_inertia += g * inertia * x;
        }
        self.grad_log_inertia[0] += g_inertia;
        let g_tp = g_ta.map(|v| -v);
        self.passive_torque_net.backward(&g_tp)?;
        Ok(())
    }

    fn zero_grads(&mut self) {
        self.passive_torque_net.zero_grads();
        self.torque_to_mcl_net.zero_grads();
        self.grad_log_inertia[0] = 0.0;
    }

    /// All trainable parameters. Weight decay is applied to conv/FC
    /// weights only, never to log_inertia or BatchNorm parameters.
    pub fn param_slots(&mut self) -> Vec<ParamSlot<'_>> {
        let mut slots = self.passive_torque_net.param_slots();
        slots.extend(self.torque_to_mcl_net.param_slots());
        slots.push(ParamSlot {
            values: &mut self.log_inertia,
            grads: &self.grad_log_inertia,
            decay: false,
        });
        slots
    }

    /// Predict the 4 central MCL values for one window (eval mode).
    pub fn forward(&mut self, window: &MotionWindow) -> Result<[f64; CENTER_LEN]> {
        let out = self.forward_windows(&[window])?;
        Ok(out[0])
    }

    /// Batched eval-mode prediction.
    pub fn forward_windows(&mut self, windows: &[&MotionWindow]) -> Result<Vec<[f64; CENTER_LEN]>> {
        let (pose, accel) = Self::pack(windows)?;
        let (xp, xa) = self.standardize(&pose, &accel)?;
        let (out, _) = self.forward_standardized(&xp, &xa, Mode::Eval)?;
        debug_assert_eq!(out.time, CENTER_LEN);
        Ok((0..windows.len())
            .map(|b| std::array::from_fn(|t| out.get(b, 0, t)))
            .collect())
    }

    /// Internal torques for one window (eval mode): (T_p, T_a), each
    /// (2, 8) in standardized units. Exposes the T_a = I*alpha - T_p
    /// identity for verification.
    pub fn torques(&mut self, window: &MotionWindow) -> Result<(Tensor, Tensor)> {
        let (pose, accel) = Self::pack(&[window])?;
        let (xp, xa) = self.standardize(&pose, &accel)?;
        let tp = self.passive_torque_net.forward(&xp, Mode::Eval)?;
        let inertia = self.inertia();
        let mut ta = xa.clone();
        for (t, p) in ta.data.iter_mut().zip(&tp.data) {
            *t = inertia * *t - p;
        }
        Ok((tp, ta))
    }

    /// Run the model over stride-`stride` windows of a 20 Hz trajectory.
    /// Overlapping central outputs (stride < 4) are averaged per sample;
    /// uncovered boundary samples are filled with the nearest prediction
    /// and flagged.
    pub fn estimate_sequence_with_stride(
        &mut self,
        traj: &TimedTrajectory,
        stride: usize,
    ) -> Result<SequenceEstimate> {
        if (traj.sample_rate - MODEL_RATE_HZ).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "estimate_sequence requires {} Hz input, got {} Hz",
                MODEL_RATE_HZ, traj.sample_rate
            )));
        }
        if traj.len() < WINDOW_LEN {
            return Err(Error::InvalidInput(format!(
                "trajectory too short: {} samples, need {WINDOW_LEN}",
                traj.len()
            )));
        }
        let kin = differentiate(traj)?;
        let windowing = windows_with_stride(&kin, stride)?;
        let refs: Vec<&MotionWindow> = windowing.windows.iter().collect();
        let preds = self.forward_windows(&refs)?;
        let n = traj.len();
        let mut sum = vec![0.0; n];
        let mut count = vec![0u32; n];
        for (w, p) in windowing.windows.iter().zip(&preds) {
            for (k, idx) in w.center.clone().enumerate() {
                sum[idx] += p[k];
                count[idx] += 1;
            }
        }
        let mut values = vec![f64::NAN; n];
        let mut boundary = vec![false; n];
        for i in 0..n {
            if count[i] > 0 {
                values[i] = sum[i] / count[i] as f64;
            }
        }
        // Fill uncovered samples with the nearest covered prediction.
        let covered: Vec<usize> = (0..n).filter(|&i| count[i] > 0).collect();
        for i in 0..n {
            if count[i] == 0 {
                let nearest = *covered
                    .iter()
                    .min_by_key(|&&c| (c as isize - i as isize).unsigned_abs())
                    .expect("at least one window");
                values[i] = values[nearest];
                boundary[i] = true;
            }
        }
        Ok(SequenceEstimate {
            mcl: MclSequence {
                sample_rate: MODEL_RATE_HZ,
                values,
            },
            boundary,
        })
    }

    pub fn estimate_sequence(&mut self, traj: &TimedTrajectory) -> Result<SequenceEstimate> {
        self.estimate_sequence_with_stride(traj, WINDOW_STRIDE)
    }

    /// Stationary MCL per pose: constant window (alpha = 0), mean of the
    /// central outputs.
    pub fn stationary_mcl_map(
        &mut self,
        poses: &[crate::kinematics::HeadPose],
    ) -> Result<Vec<f64>> {
        let windows: Vec<MotionWindow> = poses
            .iter()
            .map(|&p| MotionWindow {
                poses: [p; WINDOW_LEN],
                acceleration: [(0.0, 0.0); WINDOW_LEN],
                start: 0,
                center: CENTER_OFFSET..CENTER_OFFSET + CENTER_LEN,
            })
            .collect();
        let refs: Vec<&MotionWindow> = windows.iter().collect();
        let preds = self.forward_windows(&refs)?;
        Ok(preds
            .iter()
            .map(|p| p.iter().sum::<f64>() / CENTER_LEN as f64)
            .collect())
    }

    fn compute_stats(dataset: &[TrainExample]) -> InputStats {
        let mut sums = [[0.0f64; 2]; 2]; // [pose/accel][axis]
        let mut sqs = [[0.0f64; 2]; 2];
        let mut n = 0.0;
        for ex in dataset {
            for t in 0..WINDOW_LEN {
                let p = [ex.window.poses[t].pitch, ex.window.poses[t].yaw];
                let a = [ex.window.acceleration[t].0, ex.window.acceleration[t].1];
                for axis in 0..2 {
                    sums[0][axis] += p[axis];
                    sqs[0][axis] += p[axis] * p[axis];
                    sums[1][axis] += a[axis];
                    sqs[1][axis] += a[axis] * a[axis];
                }
                n += 1.0;
            }
        }
        let stat = |kind: usize, axis: usize| {
            let mean = sums[kind][axis] / n;
            let var = (sqs[kind][axis] / n - mean * mean).max(0.0);
            (mean, var.sqrt().max(1e-6))
        };
        let (pm0, ps0) = stat(0, 0);
        let (pm1, ps1) = stat(0, 1);
        let (am0, as0) = stat(1, 0);
        let (am1, as1) = stat(1, 1);
        InputStats {
            pose_mean: [pm0, pm1],
            pose_std: [ps0, ps1],
            accel_mean: [am0, am1],
            accel_std: [as0, as1],
        }
    }

    /// Train on windowed examples; returns the per-epoch mean train loss.
    /// Deterministic given the dataset order, this net's initial
    /// parameters, and `shuffle_seed`.
    pub fn train(
        &mut self,
        dataset: &[TrainExample],
        cfg: &MclTrainConfig,
        shuffle_seed: u64,
    ) -> Result<Vec<f64>> {
        if dataset.is_empty() {
            return Err(Error::InvalidInput("empty training dataset".into()));
        }
        self.set_input_stats(Self::compute_stats(dataset))?;
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
                let windows: Vec<&MotionWindow> =
                    chunk.iter().map(|&i| &dataset[i].window).collect();
                let (pose, accel) = Self::pack(&windows)?;
                let (xp, xa) = self.standardize(&pose, &accel)?;
                let mut target = Tensor::zeros(chunk.len(), 1, CENTER_LEN);
                for (b, &i) in chunk.iter().enumerate() {
                    for t in 0..CENTER_LEN {
                        target.set(b, 0, t, dataset[i].targets[t]);
                    }
                }
                self.zero_grads();
                let (out, _) = self.forward_standardized(&xp, &xa, Mode::Train)?;
                let (loss, grad) = l2_loss(&out, &target);
                self.backward(&grad)?;
                adam.step(self.param_slots(), lr, cfg.weight_decay);
                epoch_loss += loss;
                batches += 1.0;
            }
            history.push(epoch_loss / batches);
        }
        Ok(history)
    }

    /// Train-mode loss for gradient checking.
    pub fn training_loss(&mut self, batch: &[TrainExample]) -> Result<f64> {
        let windows: Vec<&MotionWindow> = batch.iter().map(|ex| &ex.window).collect();
        let (pose, accel) = Self::pack(&windows)?;
        let (xp, xa) = self.standardize(&pose, &accel)?;
        let mut target = Tensor::zeros(batch.len(), 1, CENTER_LEN);
        for (b, ex) in batch.iter().enumerate() {
            for t in 0..CENTER_LEN {
                target.set(b, 0, t, ex.targets[t]);
            }
        }
        let (out, _) = self.forward_standardized(&xp, &xa, Mode::Train)?;
        Ok(l2_loss(&out, &target).0)
    }

    /// End-to-end finite-difference check of the composed model
    /// (both networks plus log_inertia); returns the max mixed relative
    /// error, as in [`crate::nn::gradcheck`].
    pub fn gradient_check(&mut self, batch: &[TrainExample]) -> Result<f64> {
        let windows: Vec<&MotionWindow> = batch.iter().map(|ex| &ex.window).collect();
        let (pose, accel) = Self::pack(&windows)?;
        let (xp, xa) = self.standardize(&pose, &accel)?;
        let mut target = Tensor::zeros(batch.len(), 1, CENTER_LEN);
        for (b, ex) in batch.iter().enumerate() {
            for t in 0..CENTER_LEN {
                target.set(b, 0, t, ex.targets[t]);
            }
        }
        self.zero_grads();
        let (out, _) = self.forward_standardized(&xp, &xa, Mode::Train)?;
        let (_, grad) = l2_loss(&out, &target);
        self.backward(&grad)?;
        let analytic: Vec<Vec<f64>> = self
            .param_slots()
            .iter()
            .map(|s| s.grads.to_vec())
            .collect();
        let h = crate::nn::gradcheck::GRADCHECK_STEP;
        let mut max_err: f64 = 0.0;
        for (si, slot_grads) in analytic.iter().enumerate() {
            for ei in 0..slot_grads.len() {
                self.param_slots()[si].values[ei] += h;
                let lp = self.training_loss(batch)?;
                self.param_slots()[si].values[ei] -= 2.0 * h;
                let lm = self.training_loss(batch)?;
                self.param_slots()[si].values[ei] += h;
                let fd = (lp - lm) / (2.0 * h);
                let g = slot_grads[ei];
                let err = (fd - g).abs() / fd.abs().max(g.abs()).max(1e-3);
                max_err = max_err.max(err);
            }
        }
        Ok(max_err)
    }

    /// Export into the standard checkpoint sections.
    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let stats = self.stats()?;
        let mut ckpt = Checkpoint::new();
        ckpt.export_network("passive_torque_net", &self.passive_torque_net);
        ckpt.export_network("torque_to_mcl_net", &self.torque_to_mcl_net);
        ckpt.insert_scalar("log_inertia", self.log_inertia[0]);
        ckpt.insert(
            "input_stats/pose_mean",
            vec![2],
            stats.pose_mean.to_vec(),
        );
        ckpt.insert("input_stats/pose_std", vec![2], stats.pose_std.to_vec());
        ckpt.insert(
            "input_stats/accel_mean",
            vec![2],
            stats.accel_mean.to_vec(),
        );
        ckpt.insert(
            "input_stats/accel_std",
            vec![2],
            stats.accel_std.to_vec(),
        );
        Ok(ckpt)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let mut net = MclNet::new(0);
        ckpt.import_network("passive_torque_net", &mut net.passive_torque_net)?;
        ckpt.import_network("torque_to_mcl_net", &mut net.torque_to_mcl_net)?;
        net.log_inertia[0] = ckpt.get_scalar("log_inertia")?;
        let vec2 = |name: &str| -> Result<[f64; 2]> {
            let e = ckpt.get(name)?;
            if e.values.len() != 2 {
                return Err(Error::Format(format!("entry '{name}' must have 2 values")));
            }
            Ok([e.values[0], e.values[1]])
        };
        net.set_input_stats(InputStats {
            pose_mean: vec2("input_stats/pose_mean")?,
            pose_std: vec2("input_stats/pose_std")?,
            accel_mean: vec2("input_stats/accel_mean")?,
            accel_std: vec2("input_stats/accel_std")?,
        })?;
        Ok(net)
    }
}
