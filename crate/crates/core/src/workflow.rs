//! End-to-end plumbing: turning generated sessions into training
//! examples, training both models, and running the post-hoc / pre-hoc
//! evaluation protocol against ground truth.

use crate::error::{Error, Result};
use crate::kinematics::{differentiate, windows_with_stride, TimedTrajectory, MODEL_RATE_HZ};
use crate::mclnet::{MclNet, MclTrainConfig, TrainExample};
use crate::metrics::{nmae, nrmse, pearson, spearman, AnchorMetrics, EvaluationReport};
use crate::oracle::{Protocol, Session, SyntheticDataset};
use crate::trajnet::{
    fit_profile_pair, synthesize_trajectory, GaussianProfile, ProfileExample, TrajTrainConfig,
    TrajectoryNet,
};

/// Window stride used when building MCLNet training examples. Stride 2
/// halves the redundancy of fully overlapping windows while keeping
/// several windows per movement.
pub const TRAIN_WINDOW_STRIDE: usize = 2;

/// Slice a session's movement segment as its own 20 Hz trajectory.
pub fn movement_segment(session: &Session) -> Result<TimedTrajectory> {
    let poses = session.trajectory.poses[session.movement_start..session.movement_end].to_vec();
    TimedTrajectory::new(MODEL_RATE_HZ, poses)
}

/// Windowed (motion, MCL) training examples from every session.
pub fn mcl_examples(dataset: &SyntheticDataset, stride: usize) -> Result<Vec<TrainExample>> {
    let mut out = Vec::new();
    for session in &dataset.sessions {
        let kin = differentiate(&session.trajectory)?;
        let windowing = windows_with_stride(&kin, stride)?;
        for w in windowing.windows {
            let targets = std::array::from_fn(|k| session.mcl.values[w.center.start + k]);
            out.push(TrainExample { window: w, targets });
        }
    }
    Ok(out)
}

/// Fitted per-movement velocity profiles for TrajectoryNet training.
/// Axes with zero net displacement get the exact zero profile rather
/// than a fit to pure velocity noise.
pub fn profile_examples(dataset: &SyntheticDataset) -> Result<Vec<ProfileExample>> {
    let mut out = Vec::new();
    for session in &dataset.sessions {
        let segment = movement_segment(session)?;
        let fits = fit_profile_pair(&segment)?;
        let delta = [
            session.target.pitch - session.anchor.pitch,
            session.target.yaw - session.anchor.yaw,
        ];
        let profiles = std::array::from_fn(|axis| {
            if delta[axis].abs() < 1e-9 {
                GaussianProfile::zero()
            } else {
                fits[axis].profile
            }
        });
        out.push(ProfileExample {
            start: session.anchor,
            end: session.target,
            profiles,
        });
    }
    Ok(out)
}

/// Train MCLNet on a generated dataset; returns the model and per-epoch
/// loss history.
pub fn train_mclnet(
    dataset: &SyntheticDataset,
    cfg: &MclTrainConfig,
    seed: u64,
) -> Result<(MclNet, Vec<f64>)> {
    let examples = mcl_examples(dataset, TRAIN_WINDOW_STRIDE)?;
    let mut net = MclNet::new(seed);
    let history = net.train(&examples, cfg, seed ^ 0x5eed)?;
    Ok((net, history))
}

/// Train TrajectoryNet on fitted movement profiles.
pub fn train_trajnet(
    dataset: &SyntheticDataset,
    cfg: &TrajTrainConfig,
    seed: u64,
) -> Result<(TrajectoryNet, Vec<f64>)> {
    let examples = profile_examples(dataset)?;
    let mut net = TrajectoryNet::new(seed);
    let history = net.train(&examples, cfg, seed ^ 0x5eed)?;
    Ok((net, history))
}

/// Evaluation mode: estimate from the measured trajectory, or forecast
/// from the pose pair alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    PostHoc,
    PreHoc,
}

impl EvalMode {
    pub fn label(&self) -> &'static str {
        match self {
            EvalMode::PostHoc => "post-hoc",
            EvalMode::PreHoc => "pre-hoc",
        }
    }
}

/// Predicted MCL curve for one session under a mode, truncated to the
/// measured length.
fn predict_session(
    mcl_net: &mut MclNet,
    traj_net: Option<&mut TrajectoryNet>,
    session: &Session,
    mode: EvalMode,
) -> Result<Vec<f64>> {
    let n = session.trajectory.len();
    match mode {
        EvalMode::PostHoc => {
            let est = mcl_net.estimate_sequence(&session.trajectory)?;
            Ok(est.mcl.values)
        }
        EvalMode::PreHoc => {
            let traj_net = traj_net
                .ok_or_else(|| Error::InvalidInput("pre-hoc mode needs TrajectoryNet".into()))?;
            // Rebuild the session from (r_s, r_e) alone: hold the anchor,
            // play the forecast movement, hold the target.
            let pair = traj_net.predict_profile(session.anchor, session.target)?;
            let movement = synthesize_trajectory(&pair, session.anchor, session.target)?;
            let mut poses = vec![session.anchor; session.movement_start];
            poses.extend_from_slice(&movement.poses);
            while poses.len() < n {
                poses.push(session.target);
            }
            poses.truncate(n.max(crate::kinematics::WINDOW_LEN));
            let predicted_traj = TimedTrajectory::new(MODEL_RATE_HZ, poses)?;
            let est = mcl_net.estimate_sequence(&predicted_traj)?;
            let mut values = est.mcl.values;
            values.truncate(n);
            Ok(values)
        }
    }
}

/// Run the evaluation protocol: per-anchor NRMSE/NMAE/correlations of
/// predicted vs ground-truth MCL, aggregated over the held-out split.
pub fn evaluate_model(
    mcl_net: &mut MclNet,
    mut traj_net: Option<&mut TrajectoryNet>,
    dataset: &SyntheticDataset,
    mode: EvalMode,
) -> Result<EvaluationReport> {
    if dataset.protocol != Protocol::Eval {
        return Err(Error::InvalidInput(
            "evaluation requires the eval split".into(),
        ));
    }
    // Group sessions by anchor, preserving first-seen order.
    let mut anchors: Vec<(f64, f64)> = Vec::new();
    for s in &dataset.sessions {
        let key = (s.anchor.pitch, s.anchor.yaw);
        if !anchors.contains(&key) {
            anchors.push(key);
        }
    }
    let mut per_anchor = Vec::with_capacity(anchors.len());
    let mut pooled_pred = Vec::new();
    let mut pooled_meas = Vec::new();
    for key in anchors {
        let mut pred = Vec::new();
        let mut meas = Vec::new();
        for session in dataset
            .sessions
            .iter()
            .filter(|s| (s.anchor.pitch, s.anchor.yaw) == key)
        {
            let p = predict_session(mcl_net, traj_net.as_deref_mut(), session, mode)?;
            let n = p.len().min(session.mcl.values.len());
            pred.extend_from_slice(&p[..n]);
            meas.extend_from_slice(&session.mcl.values[..n]);
        }
        per_anchor.push(AnchorMetrics {
            anchor: key,
            nrmse_pct: nrmse(&pred, &meas)?,
            nmae_pct: nmae(&pred, &meas)?,
            pearson: pearson(&pred, &meas)?,
            spearman: spearman(&pred, &meas)?,
            samples: meas.len(),
        });
        pooled_pred.extend(pred);
        pooled_meas.extend(meas);
    }
    EvaluationReport::from_anchors(mode.label(), per_anchor, &pooled_pred, &pooled_meas)
}

/// Per-axis velocity-curve NRMSE (percent) of forecast movements against
/// the oracle's noise-free nominal curves, averaged over the sessions
/// where the axis moves. Measured realizations carry per-session width
/// jitter the network cannot know, so regression accuracy is judged
/// against the underlying main-sequence law.
pub fn velocity_curve_nrmse(
    traj_net: &mut TrajectoryNet,
    dataset: &SyntheticDataset,
    cfg: &crate::oracle::OracleConfig,
) -> Result<(f64, f64)> {
    let mut sums = [0.0f64; 2];
    let mut counts = [0usize; 2];
    for session in &dataset.sessions {
        let nominal = cfg.nominal_profiles(session.anchor, session.target);
        let reference = synthesize_trajectory(&nominal, session.anchor, session.target)?;
        let kin_meas = differentiate(&reference)?;
        let pair = traj_net.predict_profile(session.anchor, session.target)?;
        let predicted = synthesize_trajectory(&pair, session.anchor, session.target)?;
        let kin_pred = differentiate(&predicted)?;
        let delta = [
            session.target.pitch - session.anchor.pitch,
            session.target.yaw - session.anchor.yaw,
        ];
        let n = kin_meas.len().max(kin_pred.len());
        for axis in 0..2 {
            if delta[axis].abs() < 1e-9 {
                continue;
            }
            // Compare on a shared grid; both curves decay to ~0 past
            // their own movement end.
            let take = |kin: &crate::kinematics::KinematicsSequence, k: usize| {
                kin.velocity
                    .get(k)
                    .map_or(0.0, |v| if axis == 0 { v.0 } else { v.1 })
            };
            let meas: Vec<f64> = (0..n).map(|k| take(&kin_meas, k)).collect();
            let pred: Vec<f64> = (0..n).map(|k| take(&kin_pred, k)).collect();
            sums[axis] += nrmse(&pred, &meas)?;
            counts[axis] += 1;
        }
    }
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::InvalidInput(
            "dataset exercises fewer than two axes".into(),
        ));
    }
    Ok((sums[0] / counts[0] as f64, sums[1] / counts[1] as f64))
}
