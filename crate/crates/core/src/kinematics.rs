//! Head pose and trajectory types, resampling, finite-difference
//! kinematics, and sliding-window extraction.
//!
//! Angles are pitch/yaw in degrees: negative pitch is down, negative yaw
//! is left. Trajectories are uniformly sampled; the downstream models all
//! operate at 20 Hz.

use crate::error::{Error, Result};

/// Sample rate the learned models operate at.
pub const MODEL_RATE_HZ: f64 = 20.0;

/// Input window length in samples (400 ms at 20 Hz).
pub const WINDOW_LEN: usize = 8;

/// Central output interval length in samples (200 ms at 20 Hz).
pub const CENTER_LEN: usize = 4;

/// Offset of the central interval within a window (samples 2..6).
pub const CENTER_OFFSET: usize = 2;

/// Window stride so that consecutive central intervals tile the sequence.
pub const WINDOW_STRIDE: usize = 4;

/// A head orientation in pitch/yaw degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadPose {
    pub pitch: f64,
    pub yaw: f64,
}

impl HeadPose {
    pub fn new(pitch: f64, yaw: f64) -> Self {
        HeadPose { pitch, yaw }
    }

    /// Component-wise difference `self - other`, i.e. the movement from
    /// `other` to `self`.
    pub fn delta(&self, other: &HeadPose) -> (f64, f64) {
        (self.pitch - other.pitch, self.yaw - other.yaw)
    }

    /// Euclidean distance in pitch-yaw degrees.
    pub fn distance(&self, other: &HeadPose) -> f64 {
        let (dp, dy) = self.delta(other);
        (dp * dp + dy * dy).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.pitch.is_finite() && self.yaw.is_finite()
    }
}

/// The pitch/yaw range covered by the study protocol.
#[derive(Debug, Clone, Copy)]
pub struct StudyField {
    pub pitch_min: f64,
    pub pitch_max: f64,
    pub yaw_min: f64,
    pub yaw_max: f64,
}

impl Default for StudyField {
    fn default() -> Self {
        StudyField {
            pitch_min: -30.0,
            pitch_max: 30.0,
            yaw_min: -50.0,
            yaw_max: 50.0,
        }
    }
}

impl StudyField {
    /// Flags poses outside the field without rejecting them.
    pub fn contains(&self, pose: &HeadPose) -> bool {
        pose.pitch >= self.pitch_min
            && pose.pitch <= self.pitch_max
            && pose.yaw >= self.yaw_min
            && pose.yaw <= self.yaw_max
    }

    /// Nearest in-field pose.
    pub fn clamp(&self, pose: &HeadPose) -> HeadPose {
        HeadPose::new(
            pose.pitch.clamp(self.pitch_min, self.pitch_max),
            pose.yaw.clamp(self.yaw_min, self.yaw_max),
        )
    }
}

/// A uniformly sampled head pose sequence. Sample `k` is at time
/// `k / sample_rate` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedTrajectory {
    pub sample_rate: f64,
    pub poses: Vec<HeadPose>,
}

impl TimedTrajectory {
    pub fn new(sample_rate: f64, poses: Vec<HeadPose>) -> Result<Self> {
        if sample_rate <= 0.0 || !sample_rate.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if poses.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("non-finite pose".into()));
        }
        Ok(TimedTrajectory { sample_rate, poses })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Duration covered by the samples, `(n - 1) / rate`.
    pub fn duration(&self) -> f64 {
        if self.poses.len() < 2 {
            0.0
        } else {
            (self.poses.len() - 1) as f64 / self.sample_rate
        }
    }
}

/// Poses with per-sample finite-difference velocity and acceleration.
#[derive(Debug, Clone)]
pub struct KinematicsSequence {
    pub sample_rate: f64,
    pub poses: Vec<HeadPose>,
    /// (pitch, yaw) angular velocity in deg/s.
    pub velocity: Vec<(f64, f64)>,
    /// (pitch, yaw) angular acceleration in deg/s^2.
    pub acceleration: Vec<(f64, f64)>,
}

impl KinematicsSequence {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }
}

/// A 400 ms motion window: 8 pose samples plus the matching acceleration
/// samples, with the central 200 ms marked for prediction.
#[derive(Debug, Clone)]
pub struct MotionWindow {
    pub poses: [HeadPose; WINDOW_LEN],
    pub acceleration: [(f64, f64); WINDOW_LEN],
    /// Index of the first sample of this window in the source sequence.
    pub start: usize,
    /// Source-sequence index range of the central 4 samples.
    pub center: std::ops::Range<usize>,
}

/// Result of windowing: the windows plus any trailing samples that could
/// not form a full window.
#[derive(Debug, Clone)]
pub struct Windowing {
    pub windows: Vec<MotionWindow>,
    /// Source indices not covered by any window's central interval.
    pub uncovered: Vec<usize>,
}

/// Linear-interpolation resampling onto a uniform grid at `target_rate`
/// over the same time span.
pub fn resample(traj: &TimedTrajectory, target_rate: f64) -> Result<TimedTrajectory> {
    if traj.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "resample needs at least 2 samples, got {}",
            traj.len()
        )));
    }
    if target_rate <= 0.0 || !target_rate.is_finite() {
        return Err(Error::InvalidInput(format!(
            "target rate must be positive, got {target_rate}"
        )));
    }
    if (target_rate - traj.sample_rate).abs() < 1e-12 {
        return Ok(traj.clone());
    }
    let duration = traj.duration();
    let n_out = (duration * target_rate).floor() as usize + 1;
    let mut poses = Vec::with_capacity(n_out);
    let src_rate = traj.sample_rate;
    for k in 0..n_out {
        let t = k as f64 / target_rate;
        let x = t * src_rate;
        let i = (x.floor() as usize).min(traj.len() - 2);
        let frac = x - i as f64;
        let a = traj.poses[i];
        let b = traj.poses[i + 1];
        poses.push(HeadPose::new(
            a.pitch + frac * (b.pitch - a.pitch),
            a.yaw + frac * (b.yaw - a.yaw),
        ));
    }
    TimedTrajectory::new(target_rate, poses)
}

/// Central finite differences for velocity and acceleration; endpoints
/// use one-sided differences so all sequences share the same length.
pub fn differentiate(traj: &TimedTrajectory) -> Result<KinematicsSequence> {
    if traj.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "differentiate needs at least 3 samples, got {}",
            traj.len()
        )));
    }
    let rate = traj.sample_rate;
    let pitch: Vec<f64> = traj.poses.iter().map(|p| p.pitch).collect();
    let yaw: Vec<f64> = traj.poses.iter().map(|p| p.yaw).collect();
    let vp = finite_difference(&pitch, rate);
    let vy = finite_difference(&yaw, rate);
    let ap = finite_difference(&vp, rate);
    let ay = finite_difference(&vy, rate);
    Ok(KinematicsSequence {
        sample_rate: rate,
        poses: traj.poses.clone(),
        velocity: vp.into_iter().zip(vy).collect(),
        acceleration: ap.into_iter().zip(ay).collect(),
    })
}

fn finite_difference(x: &[f64], rate: f64) -> Vec<f64> {
    let n = x.len();
    let mut d = Vec::with_capacity(n);
    d.push((x[1] - x[0]) * rate);
    for t in 1..n - 1 {
        d.push((x[t + 1] - x[t - 1]) * rate / 2.0);
    }
    d.push((x[n - 1] - x[n - 2]) * rate);
    d
}

/// Extracts stride-4 windows of 8 samples from a 20 Hz sequence. Central
/// intervals tile the covered range; trailing samples that cannot form a
/// full window are reported as uncovered, as are the leading/trailing
/// half-margins.
pub fn windows(kin: &KinematicsSequence) -> Result<Windowing> {
    windows_with_stride(kin, WINDOW_STRIDE)
}

/// Same as [`windows`] with a caller-selected stride in 1..=4. Strides
/// below 4 yield overlapping central intervals; merging overlaps is the
/// model's job, not the extractor's.
pub fn windows_with_stride(kin: &KinematicsSequence, stride: usize) -> Result<Windowing> {
    if (kin.sample_rate - MODEL_RATE_HZ).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "windowing requires {} Hz input, got {} Hz",
            MODEL_RATE_HZ, kin.sample_rate
        )));
    }
    if !(1..=WINDOW_STRIDE).contains(&stride) {
        return Err(Error::InvalidInput(format!(
            "stride must be in 1..={WINDOW_STRIDE}, got {stride}"
        )));
    }
    let n = kin.len();
    if n < WINDOW_LEN {
        return Err(Error::InvalidInput(format!(
            "windowing needs at least {WINDOW_LEN} samples, got {n}"
        )));
    }
    let mut out = Vec::new();
    let mut covered = vec![false; n];
    let mut start = 0;
    while start + WINDOW_LEN <= n {
        let mut poses = [HeadPose::new(0.0, 0.0); WINDOW_LEN];
        let mut acceleration = [(0.0, 0.0); WINDOW_LEN];
        for k in 0..WINDOW_LEN {
            poses[k] = kin.poses[start + k];
            acceleration[k] = kin.acceleration[start + k];
        }
        let center = start + CENTER_OFFSET..start + CENTER_OFFSET + CENTER_LEN;
        for i in center.clone() {
            covered[i] = true;
        }
        out.push(MotionWindow {
            poses,
            acceleration,
            start,
            center,
        });
        start += stride;
    }
    let uncovered = (0..n).filter(|&i| !covered[i]).collect();
    Ok(Windowing {
        windows: out,
        uncovered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ramp(rate: f64, secs: f64, yaw_end: f64) -> TimedTrajectory {
        let n = (rate * secs) as usize + 1;
        let poses = (0..n)
            .map(|k| {
                let t = k as f64 / rate;
                HeadPose::new(0.0, yaw_end * t / secs)
            })
            .collect();
        TimedTrajectory::new(rate, poses).unwrap()
    }

    #[test]
    fn resample_constant() {
        let traj =
            TimedTrajectory::new(90.0, vec![HeadPose::new(0.0, 0.0); 91]).unwrap();
        let out = resample(&traj, 20.0).unwrap();
        assert_eq!(out.len(), 21);
        for p in &out.poses {
            assert_eq!(p.pitch, 0.0);
            assert_eq!(p.yaw, 0.0);
        }
    }

    #[test]
    fn resample_linear_ramp_midpoint() {
        let traj = ramp(90.0, 1.0, 10.0);
        let out = resample(&traj, 20.0).unwrap();
        assert_eq!(out.len(), 21);
        assert_abs_diff_eq!(out.poses[10].yaw, 5.0, epsilon = 1e-9);
        // Linear in between too.
        for (k, p) in out.poses.iter().enumerate() {
            assert_abs_diff_eq!(p.yaw, k as f64 * 0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn resample_identity_at_same_rate() {
        let traj = ramp(20.0, 1.0, 10.0);
        let out = resample(&traj, 20.0).unwrap();
        assert_eq!(out, traj);
    }

    #[test]
    fn resample_rejects_short_input() {
        let traj = TimedTrajectory::new(90.0, vec![HeadPose::new(0.0, 0.0)]).unwrap();
        assert!(matches!(
            resample(&traj, 20.0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn differentiate_constant_is_zero() {
        let traj =
            TimedTrajectory::new(20.0, vec![HeadPose::new(3.0, -4.0); 10]).unwrap();
        let kin = differentiate(&traj).unwrap();
        for t in 0..kin.len() {
            assert_eq!(kin.velocity[t], (0.0, 0.0));
            assert_eq!(kin.acceleration[t], (0.0, 0.0));
        }
    }

    #[test]
    fn differentiate_linear_pitch() {
        let rate = 20.0;
        let poses: Vec<HeadPose> = (0..20)
            .map(|k| HeadPose::new(10.0 * k as f64 / rate, 0.0))
            .collect();
        let traj = TimedTrajectory::new(rate, poses).unwrap();
        let kin = differentiate(&traj).unwrap();
        for t in 0..kin.len() {
            assert_abs_diff_eq!(kin.velocity[t].0, 10.0, epsilon = 1e-9);
        }
        for t in 1..kin.len() - 1 {
            assert_abs_diff_eq!(kin.acceleration[t].0, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn differentiate_gaussian_velocity_peak_location() {
        // Pose = cumulative integral of a Gaussian velocity bump; the
        // finite-difference velocity must peak within one sample of mu.
        let rate = 20.0;
        let (amp, mu, sigma) = (50.0, 0.5, 0.12);
        let n = 21;
        let dt = 1.0 / rate;
        let mut poses = Vec::with_capacity(n);
        let mut angle = 0.0;
        let vel = |t: f64| amp * (-((t - mu) * (t - mu)) / (2.0 * sigma * sigma)).exp();
        poses.push(HeadPose::new(0.0, angle));
        for k in 1..n {
            let t0 = (k - 1) as f64 * dt;
            let t1 = k as f64 * dt;
            angle += 0.5 * (vel(t0) + vel(t1)) * dt;
            poses.push(HeadPose::new(0.0, angle));
        }
        let traj = TimedTrajectory::new(rate, poses).unwrap();
        let kin = differentiate(&traj).unwrap();
        let peak = kin
            .velocity
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .unwrap()
            .0;
        let peak_t = peak as f64 * dt;
        assert!((peak_t - mu).abs() <= dt + 1e-12, "peak at {peak_t}");
    }

    #[test]
    fn differentiate_rejects_short_input() {
        let traj =
            TimedTrajectory::new(20.0, vec![HeadPose::new(0.0, 0.0); 2]).unwrap();
        assert!(matches!(differentiate(&traj), Err(Error::InvalidInput(_))));
    }

    fn kin_of_len(n: usize) -> KinematicsSequence {
        KinematicsSequence {
            sample_rate: 20.0,
            poses: vec![HeadPose::new(0.0, 0.0); n],
            velocity: vec![(0.0, 0.0); n],
            acceleration: vec![(0.0, 0.0); n],
        }
    }

    #[test]
    fn windows_twenty_samples() {
        let w = windows(&kin_of_len(20)).unwrap();
        assert_eq!(w.windows.len(), 4);
        let mut covered: Vec<usize> = Vec::new();
        for win in &w.windows {
            covered.extend(win.center.clone());
        }
        assert_eq!(covered, (2..18).collect::<Vec<_>>());
        assert_eq!(w.uncovered, vec![0, 1, 18, 19]);
    }

    #[test]
    fn windows_minimal() {
        let w = windows(&kin_of_len(8)).unwrap();
        assert_eq!(w.windows.len(), 1);
        assert_eq!(w.windows[0].center, 2..6);
    }

    #[test]
    fn windows_too_short() {
        assert!(matches!(
            windows(&kin_of_len(7)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn windows_wrong_rate() {
        let mut kin = kin_of_len(20);
        kin.sample_rate = 90.0;
        assert!(matches!(windows(&kin), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn centers_partition_covered_range() {
        for n in 8..40 {
            let w = windows(&kin_of_len(n)).unwrap();
            let mut seen = vec![0u32; n];
            for win in &w.windows {
                for i in win.center.clone() {
                    seen[i] += 1;
                }
            }
            for (i, &c) in seen.iter().enumerate() {
                let uncov = w.uncovered.contains(&i);
                assert!(
                    (c == 1 && !uncov) || (c == 0 && uncov),
                    "n={n} i={i} count={c}"
                );
            }
        }
    }

    #[test]
    fn study_field_flags() {
        let field = StudyField::default();
        assert!(field.contains(&HeadPose::new(30.0, 50.0)));
        assert!(!field.contains(&HeadPose::new(31.0, 0.0)));
        assert!(!field.contains(&HeadPose::new(0.0, -51.0)));
    }

    #[test]
    fn differentiate_resampled_sine_matches_closed_form() {
        // 2 Hz-rate sine at 90 Hz resampled to 20 Hz: interior velocity
        // within O(dt^2) of the analytic derivative.
        let rate = 90.0;
        let f = 0.8; // Hz
        let n = 181;
        let poses: Vec<HeadPose> = (0..n)
            .map(|k| {
                let t = k as f64 / rate;
                HeadPose::new(0.0, 10.0 * (2.0 * std::f64::consts::PI * f * t).sin())
            })
            .collect();
        let traj = TimedTrajectory::new(rate, poses).unwrap();
        let down = resample(&traj, 20.0).unwrap();
        let kin = differentiate(&down).unwrap();
        let w = 2.0 * std::f64::consts::PI * f;
        for t in 2..kin.len() - 2 {
            let time = t as f64 / 20.0;
            let exact = 10.0 * w * (w * time).cos();
            // dt = 50 ms; second-order error bound with generous constant.
            assert!(
                (kin.velocity[t].1 - exact).abs() < 10.0 * w * w * w * 0.05 * 0.05,
                "t={t}: {} vs {exact}",
                kin.velocity[t].1
            );
        }
    }
}
