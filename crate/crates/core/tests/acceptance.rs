//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line (run with `--nocapture` to see them).

use neckmcl::emg::{self, PipelineConfig, RawEmgRecord};
use neckmcl::kinematics::HeadPose;
use neckmcl::mclnet::{MclNet, MclTrainConfig};
use neckmcl::metrics;
use neckmcl::nn::{network_gradcheck, BatchNorm1d, Conv1d, FullyConnected, Layer, MaxPool1d, Network, Relu, Tensor};
use neckmcl::oracle::{calibrate, gen_dataset, oracle_mcl, CalibrationTargets, OracleConfig, Protocol, SyntheticDataset};
use neckmcl::scanpath::{self, Condition};
use neckmcl::trajnet::{synthesize_trajectory, TrajTrainConfig, TrajectoryNet};
use neckmcl::workflow::{self, EvalMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::OnceLock;
use std::time::Instant;

const SEED: u64 = 7;

struct Shared {
    oracle: OracleConfig,
    eval: SyntheticDataset,
    mcl_net: MclNet,
    traj_net: TrajectoryNet,
    /// Wall time for dataset generation plus both trainings.
    setup_secs: f64,
}

fn shared() -> &'static Shared {
    static SHARED: OnceLock<Shared> = OnceLock::new();
    SHARED.get_or_init(|| {
        let t0 = Instant::now();
        let oracle = calibrate(SEED, &CalibrationTargets::default()).unwrap();
        let pilot = gen_dataset(&oracle, Protocol::Pilot).unwrap();
        let eval = gen_dataset(&oracle, Protocol::Eval).unwrap();
        let (mcl_net, _) =
            workflow::train_mclnet(&pilot, &MclTrainConfig::default(), SEED).unwrap();
        // The synthetic pilot split has only 210 movements, far fewer than
        // the human study; the published 25-epoch schedule underfits it,
        // so the profile regressor trains longer at the same rates.
        let traj_cfg = TrajTrainConfig {
            epochs: 400,
            lr_drop_epoch: 300,
            ..TrajTrainConfig::default()
        };
        let (traj_net, _) = workflow::train_trajnet(&pilot, &traj_cfg, SEED).unwrap();
        Shared {
            oracle,
            eval,
            mcl_net,
            traj_net,
            setup_secs: t0.elapsed().as_secs_f64(),
        }
    })
}

fn report(criterion: usize, desc: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion} [{}]: {desc} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn random_tensor(rng: &mut impl Rng, b: usize, c: usize, t: usize) -> Tensor {
    let data: Vec<f64> = (0..b * c * t).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::from_vec(b, c, t, data).unwrap()
}

#[test]
fn acceptance_1_gradient_correctness() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst: f64 = 0.0;

    // Each layer type alone (Relu/MaxPool composed with a parametric
    // layer so there is something to differentiate).
    let cases: Vec<(&str, Network, usize, usize)> = vec![
        (
            "fully-connected",
            Network::new(vec![Layer::FullyConnected(FullyConnected::new(4, 3, &mut rng))]),
            4,
            3,
        ),
        (
            "conv1d",
            Network::new(vec![Layer::Conv1d(Conv1d::new(3, 2, 3, &mut rng))]),
            3,
            2,
        ),
        (
            "batchnorm1d",
            Network::new(vec![Layer::BatchNorm1d(BatchNorm1d::new(3))]),
            3,
            3,
        ),
        (
            "relu",
            Network::new(vec![
                Layer::Conv1d(Conv1d::new(3, 3, 3, &mut rng)),
                Layer::Relu(Relu::new()),
            ]),
            3,
            3,
        ),
        (
            "maxpool1d",
            Network::new(vec![
                Layer::Conv1d(Conv1d::new(3, 3, 3, &mut rng)),
                Layer::MaxPool1d(MaxPool1d::new()),
            ]),
            3,
            3,
        ),
    ];
    for (name, mut net, cin, cout) in cases {
        let x = random_tensor(&mut rng, 4, cin, 8);
        let probe = net.forward(&x, neckmcl::nn::Mode::Train).unwrap();
        let y = random_tensor(&mut rng, probe.batch, cout, probe.time);
        let err = network_gradcheck(&mut net, &x, &y).unwrap();
        assert!(err < 1e-4, "{name} gradcheck error {err}");
        worst = worst.max(err);
    }

    // Both composed models end to end, on fresh initializations: trained
    // weights can sit arbitrarily close to ReLU/maxpool kinks where
    // central differences lose accuracy without any gradient bug.
    let s = shared();
    let mut mcl = MclNet::new(42);
    mcl.set_input_stats(s.mcl_net.input_stats.unwrap()).unwrap();
    // Pick the most dynamic windows: near-stationary ones have tiny
    // standardized inputs and ill-conditioned finite differences.
    let mut examples = workflow::mcl_examples(&s.eval, 4).unwrap();
    examples.sort_by(|a, b| {
        let energy = |ex: &neckmcl::mclnet::TrainExample| {
            ex.window
                .acceleration
                .iter()
                .map(|&(p, y)| p.abs() + y.abs())
                .sum::<f64>()
        };
        energy(b).total_cmp(&energy(a))
    });
    let err = mcl.gradient_check(&examples[..3]).unwrap();
    assert!(err < 1e-4, "MclNet gradcheck error {err}");
    worst = worst.max(err);

    let mut traj = TrajectoryNet::new(42);
    traj.stats = s.traj_net.stats.clone();
    let profiles = workflow::profile_examples(&s.eval).unwrap();
    let err = traj.gradient_check(&profiles[..4]).unwrap();
    assert!(err < 1e-4, "TrajectoryNet gradcheck error {err}");
    worst = worst.max(err);

    let elapsed = t0.elapsed().as_secs_f64() - s.setup_secs.min(t0.elapsed().as_secs_f64());
    report(
        1,
        "all layers and both composed networks pass gradient checks < 1e-4",
        worst < 1e-4 && elapsed < 60.0,
        &format!("worst rel err {worst:.2e}, {elapsed:.1}s excluding shared setup"),
    );
}

#[test]
fn acceptance_2_posthoc_estimation() {
    let s = shared();
    let t0 = Instant::now();
    let mut mcl = s.mcl_net.clone();
    let rep = workflow::evaluate_model(&mut mcl, None, &s.eval, EvalMode::PostHoc).unwrap();
    let total_secs = s.setup_secs + t0.elapsed().as_secs_f64();
    let pass = rep.nrmse_mean <= 15.0
        && rep.nmae_mean <= 12.0
        && rep.pearson_pooled >= 0.6
        && total_secs < 900.0;
    report(
        2,
        "post-hoc eval split: NRMSE <= 15%, NMAE <= 12%, Pearson >= 0.6, < 15 min",
        pass,
        &format!(
            "NRMSE {:.2}+/-{:.2}%, NMAE {:.2}%, r {:.3}, train+eval {:.0}s",
            rep.nrmse_mean, rep.nrmse_std, rep.nmae_mean, rep.pearson_pooled, total_secs
        ),
    );
}

#[test]
fn acceptance_3_trajectory_regression() {
    let s = shared();
    let mut traj = s.traj_net.clone();
    let (vp, vy) = workflow::velocity_curve_nrmse(&mut traj, &s.eval, &s.oracle).unwrap();
    let mut worst_endpoint: f64 = 0.0;
    for session in &s.eval.sessions {
        let pair = traj.predict_profile(session.anchor, session.target).unwrap();
        let synth = synthesize_trajectory(&pair, session.anchor, session.target).unwrap();
        let end = *synth.poses.last().unwrap();
        worst_endpoint = worst_endpoint
            .max((end.pitch - session.target.pitch).abs())
            .max((end.yaw - session.target.yaw).abs());
    }
    report(
        3,
        "velocity-curve NRMSE <= 5% per axis; endpoints within 1e-6 deg",
        vp <= 5.0 && vy <= 5.0 && worst_endpoint <= 1e-6,
        &format!("pitch {vp:.2}%, yaw {vy:.2}%, worst endpoint {worst_endpoint:.2e} deg"),
    );
}

#[test]
fn acceptance_4_prehoc_prediction() {
    let s = shared();
    let mut mcl = s.mcl_net.clone();
    let mut traj = s.traj_net.clone();
    let post = workflow::evaluate_model(&mut mcl, None, &s.eval, EvalMode::PostHoc).unwrap();
    let pre =
        workflow::evaluate_model(&mut mcl, Some(&mut traj), &s.eval, EvalMode::PreHoc).unwrap();
    let pass = pre.nrmse_mean <= 20.0
        && pre.pearson_pooled >= 0.55
        && pre.spearman_pooled >= 0.55
        && pre.nrmse_mean >= post.nrmse_mean;
    report(
        4,
        "pre-hoc: NRMSE <= 20%, r/rho >= 0.55, pre-hoc error >= post-hoc error",
        pass,
        &format!(
            "pre {:.2}% vs post {:.2}%, r {:.3}, rho {:.3}",
            pre.nrmse_mean, post.nrmse_mean, pre.pearson_pooled, pre.spearman_pooled
        ),
    );
}

#[test]
fn acceptance_5_emg_round_trip() {
    let s = shared();
    let cfg = PipelineConfig::default();
    let mut pooled_est = Vec::new();
    let mut pooled_truth = Vec::new();
    let mut in_bounds = true;
    let mut gain_exact = true;
    let mut per_session_r = Vec::new();
    for session in s.eval.sessions.iter().take(20) {
        let est = emg::process(&session.emg, &cfg).unwrap();
        let n = est.values.len().min(session.mcl.values.len());
        per_session_r
            .push(metrics::pearson(&est.values[..n], &session.mcl.values[..n]).unwrap());
        // The pipeline normalizes each session to [0,1]; map the ground
        // truth into the same per-session frame before pooling so the
        // pooled correlation compares like with like.
        let (lo, hi) = session.mcl.values[..n]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let span = (hi - lo).max(f64::EPSILON);
        pooled_est.extend_from_slice(&est.values[..n]);
        pooled_truth.extend(session.mcl.values[..n].iter().map(|&v| (v - lo) / span));
        in_bounds &= est.values.iter().all(|&v| (0.0..=1.0).contains(&v));
        // Scale all channels by a power of two: bit-exact invariance.
        let scaled = RawEmgRecord {
            sample_rate: session.emg.sample_rate,
            channels: std::array::from_fn(|c| {
                session.emg.channels[c].iter().map(|v| v * 2.0).collect()
            }),
        };
        let est2 = emg::process(&scaled, &cfg).unwrap();
        gain_exact &= est.values == est2.values;
    }
    let r = metrics::pearson(&pooled_est, &pooled_truth).unwrap();
    let mean_r = per_session_r.iter().sum::<f64>() / per_session_r.len() as f64;
    let min_r = per_session_r.iter().cloned().fold(f64::INFINITY, f64::min);
    report(
        5,
        "EMG round trip over 20 sessions: r >= 0.9, outputs in [0,1], gain invariance exact",
        r >= 0.9 && in_bounds && gain_exact,
        &format!(
            "pooled r {r:.3} (per-session mean {mean_r:.3}, min {min_r:.3}), \
             in-bounds {in_bounds}, gain-exact {gain_exact}"
        ),
    );
}

#[test]
fn acceptance_6_oracle_calibration() {
    let cfg = calibrate(SEED, &CalibrationTargets::default()).unwrap();
    let origin = oracle_mcl(&cfg, HeadPose::new(0.0, 0.0), (0.0, 0.0));
    let extreme = oracle_mcl(&cfg, HeadPose::new(30.0, 50.0), (0.0, 0.0));
    let mut yaw_monotone = true;
    for pitch in [-20.0, 0.0, 20.0] {
        let mut prev = -1.0;
        for k in 0..=5 {
            let v = oracle_mcl(&cfg, HeadPose::new(pitch, 10.0 * k as f64), (0.0, 0.0));
            yaw_monotone &= v > prev;
            prev = v;
        }
    }
    let up = oracle_mcl(&cfg, HeadPose::new(30.0, 0.0), (0.0, 0.0));
    let down = oracle_mcl(&cfg, HeadPose::new(-30.0, 0.0), (0.0, 0.0));
    let pass = (origin - 0.17).abs() <= 0.02
        && (extreme - 0.68).abs() <= 0.02
        && yaw_monotone
        && up > down;
    report(
        6,
        "calibrated map: MCL(0,0)=0.17+/-0.02, MCL(30,50)=0.68+/-0.02, yaw monotone, pitch asymmetric",
        pass,
        &format!("origin {origin:.3}, extreme {extreme:.3}, up {up:.3} vs down {down:.3}"),
    );
}

#[test]
fn acceptance_7_scanpath_ordering() {
    let s = shared();
    let t0 = Instant::now();
    let results: Vec<(f64, f64, f64, bool)> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let mut mcl = s.mcl_net.clone();
            let mut traj = s.traj_net.clone();
            let mut prng = ChaCha8Rng::seed_from_u64(seed);
            prng.set_stream(0);
            let partition = scanpath::partition_rotation(&mut prng);
            let mut hcs = [0.0f64; 3];
            let mut totals = [0.0f64; 3];
            for (i, cond) in [Condition::Max, Condition::Rnd, Condition::Min]
                .into_iter()
                .enumerate()
            {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(1 + i as u64);
                let path =
                    scanpath::generate(cond, &partition, &mut traj, &mut mcl, &mut rng).unwrap();
                hcs[i] = path.total_hc();
                totals[i] = path.total_rotation();
            }
            let rotation_identical = totals[0] == totals[1] && totals[1] == totals[2];
            (hcs[0], hcs[1], hcs[2], rotation_identical)
        })
        .collect();
    let ordered = results
        .iter()
        .filter(|(max, rnd, min, _)| max > rnd && rnd > min)
        .count();
    let rotations_ok = results.iter().all(|r| r.3);
    let mean = |f: fn(&(f64, f64, f64, bool)) -> f64| {
        results.iter().map(f).sum::<f64>() / results.len() as f64
    };
    let (m, r, n) = (mean(|x| x.0), mean(|x| x.1), mean(|x| x.2));
    let secs = t0.elapsed().as_secs_f64();
    report(
        7,
        "MAX > RND > MIN summed H_c in >= 95/100 seeds, identical rotation, < 5 min",
        ordered >= 95 && rotations_ok && secs < 300.0,
        &format!(
            "{ordered}/100 ordered, mean H_c ratio {:.2}:{:.2}:1.00 (study reports 3.48:1.95:1.00), {secs:.0}s",
            m / n,
            r / n
        ),
    );
}

#[test]
fn acceptance_8_metric_unit_suite() {
    let same = [0.3, 0.5, 0.9];
    let mut pass = metrics::nrmse(&same, &same).unwrap() == 0.0;
    pass &= metrics::nrmse(&[1.0, 0.0], &[0.0, 1.0]).unwrap() == 100.0;
    pass &= (metrics::nrmse(&[0.1, 1.1, 2.1], &[0.0, 1.0, 2.0]).unwrap() - 5.0).abs() < 1e-9;
    pass &= metrics::nmae(&same, &same).unwrap() == 0.0;
    pass &= (metrics::nmae(&[0.5, 0.5], &[0.0, 1.0]).unwrap() - 50.0).abs() < 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let meas: Vec<f64> = (0..16).map(|_| rng.gen_range(0.0..1.0)).collect();
        let pred: Vec<f64> = (0..16).map(|_| rng.gen_range(0.0..1.0)).collect();
        pass &= metrics::nmae(&pred, &meas).unwrap() <= metrics::nrmse(&pred, &meas).unwrap() + 1e-12;
    }
    let x = [0.0, 1.0, 2.0, 3.0];
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
    pass &= (metrics::pearson(&x, &y).unwrap() - 1.0).abs() < 1e-9;
    pass &= (metrics::spearman(&x, &y).unwrap() - 1.0).abs() < 1e-9;
    let xc = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let yc: Vec<f64> = xc.iter().map(|v| v * v * v).collect();
    pass &= (metrics::spearman(&xc, &yc).unwrap() - 1.0).abs() < 1e-9;
    pass &= metrics::pearson(&xc, &yc).unwrap() < 1.0;
    pass &= (metrics::spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]).unwrap() - 1.0)
        .abs()
        < 1e-9;
    report(8, "metric unit examples exact or within 1e-9", pass, "all listed examples");
}

#[test]
fn acceptance_9_determinism() {
    let bin = env!("CARGO_BIN_EXE_neckmcl");
    let root = tempfile::tempdir().unwrap();
    let cfg_path = root.path().join("run.cfg");
    // One-epoch schedules keep the double train fast; determinism does
    // not depend on the schedule.
    std::fs::write(
        &cfg_path,
        "seed = 3\ntrain.mclnet.epochs = 1\ntrain.trajnet.epochs = 1\n",
    )
    .unwrap();
    let run = |args: &[&str]| {
        let out = std::process::Command::new(bin)
            .args(args)
            .current_dir(root.path())
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    };
    let read_dir_bytes = |name: &str| {
        let mut entries: Vec<_> = std::fs::read_dir(root.path().join(name))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        entries
            .into_iter()
            .map(|p| (p.file_name().unwrap().to_owned(), std::fs::read(&p).unwrap()))
            .collect::<Vec<_>>()
    };

    let mut pass = true;
    for gen in ["a", "b"] {
        run(&["synth", "gen", "--protocol", "eval", "--out", gen, "--config", "run.cfg"]);
    }
    pass &= read_dir_bytes("a") == read_dir_bytes("b");

    run(&["train", "mclnet", "--data", "a", "--out", "m1.ckpt", "--config", "run.cfg"]);
    run(&["train", "mclnet", "--data", "a", "--out", "m2.ckpt", "--config", "run.cfg"]);
    run(&["train", "trajnet", "--data", "a", "--out", "t1.ckpt", "--config", "run.cfg"]);
    run(&["train", "trajnet", "--data", "a", "--out", "t2.ckpt", "--config", "run.cfg"]);
    let bytes = |n: &str| std::fs::read(root.path().join(n)).unwrap();
    pass &= bytes("m1.ckpt") == bytes("m2.ckpt");
    pass &= bytes("t1.ckpt") == bytes("t2.ckpt");

    let p1 = run(&["predict", "--ckpt-mcl", "m1.ckpt", "--ckpt-traj", "t1.ckpt", "--start", "0,0", "--end", "20,30"]);
    let p2 = run(&["predict", "--ckpt-mcl", "m2.ckpt", "--ckpt-traj", "t2.ckpt", "--start", "0,0", "--end", "20,30"]);
    pass &= p1 == p2;

    run(&["estimate", "--ckpt", "m1.ckpt", "--trajectory", "a/session_000_trajectory.csv", "--out", "e1.csv"]);
    run(&["estimate", "--ckpt", "m2.ckpt", "--trajectory", "a/session_000_trajectory.csv", "--out", "e2.csv"]);
    pass &= bytes("e1.csv") == bytes("e2.csv");

    for cond in ["max", "rnd", "min"] {
        run(&["scanpath", "gen", "--condition", cond, "--seed", "5", "--ckpt-mcl", "m1.ckpt", "--ckpt-traj", "t1.ckpt", "--out", &format!("{cond}1.csv")]);
        run(&["scanpath", "gen", "--condition", cond, "--seed", "5", "--ckpt-mcl", "m1.ckpt", "--ckpt-traj", "t1.ckpt", "--out", &format!("{cond}2.csv")]);
        pass &= bytes(&format!("{cond}1.csv")) == bytes(&format!("{cond}2.csv"));
    }

    report(
        9,
        "same seed/config/inputs give byte-identical outputs for every subcommand",
        pass,
        "synth gen, train x2, predict, estimate, scanpath x3",
    );
}
