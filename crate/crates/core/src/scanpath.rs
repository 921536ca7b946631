//! Discomfort-ordered scan-path generation: MAX/RND/MIN conditions share
//! a random partition of a 900-degree rotation budget into 30 steps and
//! differ only in how the forecast cumulative MCL enters the greedy
//! per-step score.

use crate::error::{Error, Result};
use crate::kinematics::{HeadPose, StudyField};
use crate::mclnet::MclNet;
use crate::trajnet::{cumulative_mcl, TrajectoryNet};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const TOTAL_ROTATION_DEG: f64 = 900.0;
pub const STEP_COUNT: usize = 30;
pub const MIN_STEP_DEG: f64 = 5.0;
pub const CANDIDATE_COUNT: usize = 36;

/// Scan-path condition: how the per-step score weighs forecast effort.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// Coverage plus normalized H_c: seeks the most demanding path.
    Max,
    /// Coverage only; effort ties broken at random.
    Rnd,
    /// Coverage minus normalized H_c: seeks the least demanding path.
    Min,
}

impl Condition {
    pub fn label(&self) -> &'static str {
        match self {
            Condition::Max => "MAX",
            Condition::Rnd => "RND",
            Condition::Min => "MIN",
        }
    }
}

/// 30 step magnitudes summing to exactly 900 degrees, each at least 5.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationPartition {
    pub steps: Vec<f64>,
}

impl RotationPartition {
    pub fn total(&self) -> f64 {
        self.steps.iter().sum()
    }
}

/// Randomly partition the rotation budget: 30 uniform draws in
/// [0.5, 1.5] scaled to the total, with a clamp-and-rescale loop
/// guaranteeing every step is at least 5 degrees.
pub fn partition_rotation(rng: &mut ChaCha8Rng) -> RotationPartition {
    partition_rotation_with(rng, TOTAL_ROTATION_DEG, STEP_COUNT, MIN_STEP_DEG)
}

/// [`partition_rotation`] with explicit budget, step count, and minimum
/// step; the defaults come from the study protocol.
pub fn partition_rotation_with(
    rng: &mut ChaCha8Rng,
    total_deg: f64,
    step_count: usize,
    min_step_deg: f64,
) -> RotationPartition {
    let mut steps: Vec<f64> = (0..step_count).map(|_| rng.gen_range(0.5..1.5)).collect();
    let sum: f64 = steps.iter().sum();
    for s in &mut steps {
        *s *= total_deg / sum;
    }
    loop {
        let deficit: f64 = steps
            .iter()
            .filter(|&&s| s < min_step_deg)
            .map(|&s| min_step_deg - s)
            .sum();
        if deficit == 0.0 {
            break;
        }
        let free: f64 = steps.iter().filter(|&&s| s >= min_step_deg).sum();
        for s in &mut steps {
            if *s < min_step_deg {
                *s = min_step_deg;
            } else {
                *s *= (free - deficit) / free;
            }
        }
    }
    // Make the left-to-right sum bit-exact: the partial sum of all but
    // the last step is within a factor of two of the total, so the final
    // subtraction is exact (Sterbenz) and re-summing returns the total.
    let partial: f64 = steps[..step_count - 1].iter().sum();
    steps[step_count - 1] = total_deg - partial;
    RotationPartition { steps }
}

/// 6 x 10 grid of 10-degree cells tiling the study field. A cell is
/// visited once the head's straight-line sweep between consecutive
/// targets passes through it.
#[derive(Debug, Clone)]
pub struct CoverageGrid {
    visited: [bool; Self::CELLS],
}

impl CoverageGrid {
    pub const ROWS: usize = 6;
    pub const COLS: usize = 10;
    pub const CELLS: usize = Self::ROWS * Self::COLS;
    const CELL_DEG: f64 = 10.0;

    pub fn new() -> Self {
        CoverageGrid {
            visited: [false; Self::CELLS],
        }
    }

    fn cell(pose: &HeadPose) -> usize {
        let row = (((pose.pitch + 30.0) / Self::CELL_DEG) as usize).min(Self::ROWS - 1);
        let col = (((pose.yaw + 50.0) / Self::CELL_DEG) as usize).min(Self::COLS - 1);
        row * Self::COLS + col
    }

    pub fn mark_pose(&mut self, pose: &HeadPose) {
        self.visited[Self::cell(pose)] = true;
    }

    /// Mark every cell the straight segment from `a` to `b` passes
    /// through (sampled at ~2-degree intervals).
    pub fn mark_segment(&mut self, a: &HeadPose, b: &HeadPose) {
        let dist = a.distance(b);
        let samples = (dist / 2.0).ceil().max(1.0) as usize;
        for k in 0..=samples {
            let f = k as f64 / samples as f64;
            let p = HeadPose::new(
                a.pitch + f * (b.pitch - a.pitch),
                a.yaw + f * (b.yaw - a.yaw),
            );
            self.mark_pose(&p);
        }
    }

    /// Visited count after additionally sweeping `a` -> `b`, without
    /// mutating this grid.
    pub fn count_with_segment(&self, a: &HeadPose, b: &HeadPose) -> usize {
        let mut probe = self.clone();
        probe.mark_segment(a, b);
        probe.count()
    }

    pub fn count(&self) -> usize {
        self.visited.iter().filter(|&&v| v).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / Self::CELLS as f64
    }
}

impl Default for CoverageGrid {
    fn default() -> Self {
        Self::new()
    }
}

/// Candidate poses for one step: up to 36 poses at 10-degree angular
/// spacing on the circle of radius `magnitude` around `current`,
/// filtered to the study field. If every candidate falls outside, the
/// magnitude is halved and the search retried.
pub fn candidate_poses(current: HeadPose, magnitude: f64) -> Result<(Vec<HeadPose>, f64)> {
    if !(magnitude > 0.0) {
        return Err(Error::InvalidInput(format!(
            "candidate magnitude must be positive, got {magnitude}"
        )));
    }
    let field = StudyField::default();
    let mut mag = magnitude;
    loop {
        let candidates: Vec<HeadPose> = (0..CANDIDATE_COUNT)
            .map(|k| {
                let a = (k as f64 * 10.0).to_radians();
                HeadPose::new(current.pitch + mag * a.cos(), current.yaw + mag * a.sin())
            })
            .filter(|p| field.contains(p))
            .collect();
        if !candidates.is_empty() {
            return Ok((candidates, mag));
        }
        mag /= 2.0;
        if mag < 1e-3 {
            return Err(Error::InvalidInput(
                "no in-field candidate at any magnitude".into(),
            ));
        }
    }
}

/// A generated 31-target scan path with its per-step forecasts.
#[derive(Debug, Clone)]
pub struct ScanPath {
    pub condition: Condition,
    /// 31 poses; poses[0] = (0, 0).
    pub poses: Vec<HeadPose>,
    /// Actual magnitude of each of the 30 steps (equals the partition
    /// step unless a corner forced halving).
    pub step_rotation: Vec<f64>,
    /// Model-forecast H_c of each step.
    pub hc: Vec<f64>,
    /// Steps where the partition magnitude had to be halved.
    pub adjusted_steps: Vec<usize>,
}

impl ScanPath {
    pub fn total_rotation(&self) -> f64 {
        self.step_rotation.iter().sum()
    }

    pub fn total_hc(&self) -> f64 {
        self.hc.iter().sum()
    }
}

/// Greedily generate a scan path from (0, 0) under a condition. At each
/// step the score over in-field candidates is the post-move visited-cell
/// count, plus (MAX) or minus (MIN) the candidate's H_c divided by the
/// candidate-set mean H_c; ties pick the lowest index, except RND which
/// breaks its coverage ties uniformly at random.
pub fn generate(
    condition: Condition,
    partition: &RotationPartition,
    traj_net: &mut TrajectoryNet,
    mcl_net: &mut MclNet,
    rng: &mut ChaCha8Rng,
) -> Result<ScanPath> {
    let mut grid = CoverageGrid::new();
    let mut current = HeadPose::new(0.0, 0.0);
    grid.mark_pose(&current);
    let mut poses = vec![current];
    let mut step_rotation = Vec::with_capacity(STEP_COUNT);
    let mut hc_per_step = Vec::with_capacity(STEP_COUNT);
    let mut adjusted = Vec::new();

    for (step, &magnitude) in partition.steps.iter().enumerate() {
        let (candidates, used_mag) = candidate_poses(current, magnitude)?;
        if used_mag != magnitude {
            adjusted.push(step);
        }
        let hcs: Vec<f64> = candidates
            .iter()
            .map(|&c| cumulative_mcl(current, c, traj_net, mcl_net))
            .collect::<Result<_>>()?;
        let mean_hc = hcs.iter().sum::<f64>() / hcs.len() as f64;
        let scores: Vec<f64> = candidates
            .iter()
            .zip(&hcs)
            .map(|(c, &hc)| {
                let coverage = grid.count_with_segment(&current, c) as f64;
                let effort = if mean_hc > 0.0 { hc / mean_hc } else { 0.0 };
                match condition {
                    Condition::Max => coverage + effort,
                    Condition::Rnd => coverage,
                    Condition::Min => coverage - effort,
                }
            })
            .collect();
        let best_score = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<usize> = (0..scores.len())
            .filter(|&i| scores[i] >= best_score - 1e-12)
            .collect();
        let chosen = match condition {
            Condition::Rnd => tied[rng.gen_range(0..tied.len())],
            _ => tied[0],
        };
        let next = candidates[chosen];
        grid.mark_segment(&current, &next);
        step_rotation.push(used_mag);
        hc_per_step.push(hcs[chosen]);
        poses.push(next);
        current = next;
    }
    Ok(ScanPath {
        condition,
        poses,
        step_rotation,
        hc: hc_per_step,
        adjusted_steps: adjusted,
    })
}

/// Fraction of the 60 coverage cells a path's sweeps visit.
pub fn coverage_report(path: &ScanPath) -> f64 {
    let mut grid = CoverageGrid::new();
    if let Some(first) = path.poses.first() {
        grid.mark_pose(first);
    }
    for w in path.poses.windows(2) {
        grid.mark_segment(&w[0], &w[1]);
    }
    grid.fraction()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mclnet::InputStats;
    use rand::SeedableRng;

    #[test]
    fn partition_sums_exactly_and_respects_min_step() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = partition_rotation(&mut rng);
            assert_eq!(p.steps.len(), STEP_COUNT);
            assert_eq!(p.total(), TOTAL_ROTATION_DEG);
            assert!(p.steps.iter().all(|&s| s >= MIN_STEP_DEG));
        }
    }

    #[test]
    fn partition_is_deterministic_per_seed() {
        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = ChaCha8Rng::seed_from_u64(11);
        assert_eq!(partition_rotation(&mut a), partition_rotation(&mut b));
    }

    #[test]
    fn candidates_at_center_are_complete_and_exact() {
        let (cands, mag) = candidate_poses(HeadPose::new(0.0, 0.0), 20.0).unwrap();
        assert_eq!(mag, 20.0);
        assert_eq!(cands.len(), CANDIDATE_COUNT);
        let field = StudyField::default();
        for c in &cands {
            assert!(field.contains(c));
            assert!((c.distance(&HeadPose::new(0.0, 0.0)) - 20.0).abs() < 1e-9);
        }
    }

    #[test]
    fn candidates_at_corner_are_filtered() {
        let corner = HeadPose::new(30.0, 50.0);
        let (cands, mag) = candidate_poses(corner, 30.0).unwrap();
        assert_eq!(mag, 30.0);
        assert!(!cands.is_empty() && cands.len() < CANDIDATE_COUNT);
        let field = StudyField::default();
        for c in &cands {
            assert!(field.contains(c));
            assert!((c.distance(&corner) - 30.0).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_counts_cells_and_segment_sweep() {
        let mut g = CoverageGrid::new();
        g.mark_pose(&HeadPose::new(0.0, 0.0));
        assert_eq!(g.count(), 1);
        // A full-width horizontal sweep crosses all 10 columns of a row.
        g.mark_segment(&HeadPose::new(0.0, -49.0), &HeadPose::new(0.0, 49.0));
        assert_eq!(g.count(), 10);
        assert_eq!(g.fraction(), 10.0 / 60.0);
    }

    fn stub_models() -> (TrajectoryNet, MclNet) {
        // Untrained weights but valid statistics: enough for generation
        // mechanics (field membership, rotation totals, determinism).
        let mut mcl = MclNet::new(3);
        mcl.set_input_stats(InputStats {
            pose_mean: [0.0, 0.0],
            pose_std: [15.0, 25.0],
            accel_mean: [0.0, 0.0],
            accel_std: [100.0, 150.0],
        })
        .unwrap();
        let mut traj = TrajectoryNet::new(4);
        traj.stats = Some(crate::trajnet::TrajStats {
            input_mean: [0.0; 4],
            input_std: [15.0, 25.0, 20.0, 20.0],
            target_mean: [0.0, 0.4, -2.0, 0.0, 0.4, -2.0],
            target_std: [30.0, 0.1, 0.5, 30.0, 0.1, 0.5],
        });
        (traj, mcl)
    }

    #[test]
    fn untrained_models_are_state_error() {
        let mut traj = TrajectoryNet::new(1);
        let mut mcl = MclNet::new(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let partition = partition_rotation(&mut rng);
        assert!(matches!(
            generate(Condition::Rnd, &partition, &mut traj, &mut mcl, &mut rng),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn generated_path_structure_is_valid() {
        let (mut traj, mut mcl) = stub_models();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let partition = partition_rotation(&mut rng);
        for cond in [Condition::Max, Condition::Rnd, Condition::Min] {
            let path = generate(cond, &partition, &mut traj, &mut mcl, &mut rng).unwrap();
            assert_eq!(path.poses.len(), STEP_COUNT + 1);
            assert_eq!(path.poses[0], HeadPose::new(0.0, 0.0));
            let field = StudyField::default();
            for (i, w) in path.poses.windows(2).enumerate() {
                assert!(field.contains(&w[1]));
                assert!(
                    (w[0].distance(&w[1]) - path.step_rotation[i]).abs() < 1e-6,
                    "step {i} distance mismatch"
                );
            }
            if path.adjusted_steps.is_empty() {
                assert!((path.total_rotation() - TOTAL_ROTATION_DEG).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn conditions_share_total_rotation() {
        let (mut traj, mut mcl) = stub_models();
        let mut seed_rng = ChaCha8Rng::seed_from_u64(8);
        let partition = partition_rotation(&mut seed_rng);
        let totals: Vec<f64> = [Condition::Max, Condition::Rnd, Condition::Min]
            .iter()
            .map(|&c| {
                let mut rng = ChaCha8Rng::seed_from_u64(99);
                generate(c, &partition, &mut traj, &mut mcl, &mut rng)
                    .unwrap()
                    .total_rotation()
            })
            .collect();
        assert_eq!(totals[0], totals[1]);
        assert_eq!(totals[1], totals[2]);
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let (mut traj, mut mcl) = stub_models();
        let mut prng = ChaCha8Rng::seed_from_u64(2);
        let partition = partition_rotation(&mut prng);
        let run = |traj: &mut TrajectoryNet, mcl: &mut MclNet| {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            generate(Condition::Rnd, &partition, traj, mcl, &mut rng).unwrap()
        };
        let a = run(&mut traj, &mut mcl);
        let b = run(&mut traj, &mut mcl);
        assert_eq!(a.poses, b.poses);
        assert_eq!(a.hc, b.hc);
    }

    #[test]
    fn generated_paths_reach_coverage_threshold() {
        let (mut traj, mut mcl) = stub_models();
        for seed in [1u64, 7, 13] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let partition = partition_rotation(&mut rng);
            for cond in [Condition::Max, Condition::Rnd, Condition::Min] {
                let path =
                    generate(cond, &partition, &mut traj, &mut mcl, &mut rng).unwrap();
                let cov = coverage_report(&path);
                assert!(
                    cov >= 0.8,
                    "{} seed {seed}: coverage {cov}",
                    cond.label()
                );
            }
        }
    }

    #[test]
    fn coverage_report_extremes() {
        let single = ScanPath {
            condition: Condition::Rnd,
            poses: vec![HeadPose::new(0.0, 0.0)],
            step_rotation: vec![],
            hc: vec![],
            adjusted_steps: vec![],
        };
        assert_eq!(coverage_report(&single), 1.0 / 60.0);
    }
}
