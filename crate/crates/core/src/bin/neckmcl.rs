//! Command-line surface: dataset synthesis, EMG processing, training,
//! estimation, pre-movement prediction, scan-path generation, evaluation,
//! and a self-test. Every subcommand is deterministic given
//! (--seed, config, inputs) and exits nonzero with a machine-readable
//! error line on failure.

use clap::{Parser, Subcommand};
use neckmcl::config::RunConfig;
use neckmcl::emg;
use neckmcl::error::{Error, Result};
use neckmcl::io;
use neckmcl::kinematics::{HeadPose, MotionWindow, CENTER_LEN, CENTER_OFFSET, WINDOW_LEN};
use neckmcl::mclnet::{InputStats, MclNet, TrainExample};
use neckmcl::metrics;
use neckmcl::nn::Checkpoint;
use neckmcl::oracle::{gen_dataset, Protocol};
use neckmcl::scanpath::{self, Condition};
use neckmcl::trajnet::{
    cumulative_mcl, GaussianProfile, ProfileExample, TrajectoryNet,
};
use neckmcl::workflow::{self, EvalMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "neckmcl",
    version,
    about = "Neck muscle contraction level modeling from head kinematics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic dataset generation
    Synth {
        #[command(subcommand)]
        cmd: SynthCmd,
    },
    /// Raw EMG processing
    Emg {
        #[command(subcommand)]
        cmd: EmgCmd,
    },
    /// Model training
    Train {
        #[command(subcommand)]
        cmd: TrainCmd,
    },
    /// Estimate MCL from a measured trajectory (post-hoc)
    Estimate {
        /// MCLNet checkpoint
        #[arg(long)]
        ckpt: PathBuf,
        /// Trajectory CSV (t_s,pitch_deg,yaw_deg at 20 Hz)
        #[arg(long)]
        trajectory: PathBuf,
        /// Output MCL CSV
        #[arg(long)]
        out: PathBuf,
    },
    /// Forecast a movement and its cumulative MCL from two poses (pre-hoc)
    Predict {
        /// MCLNet checkpoint
        #[arg(long = "ckpt-mcl")]
        ckpt_mcl: PathBuf,
        /// TrajectoryNet checkpoint
        #[arg(long = "ckpt-traj")]
        ckpt_traj: PathBuf,
        /// Start pose as "pitch,yaw" in degrees
        #[arg(long)]
        start: String,
        /// End pose as "pitch,yaw" in degrees
        #[arg(long)]
        end: String,
        /// Optionally write the predicted profiles as a CSV
        #[arg(long)]
        out_profile: Option<PathBuf>,
    },
    /// Scan-path generation
    Scanpath {
        #[command(subcommand)]
        cmd: ScanCmd,
    },
    /// Evaluate trained models on a generated eval dataset
    Evaluate {
        /// posthoc | prehoc
        #[arg(long)]
        mode: String,
        /// Dataset directory from `synth gen --protocol eval`
        #[arg(long)]
        data: PathBuf,
        /// MCLNet checkpoint
        #[arg(long = "ckpt-mcl")]
        ckpt_mcl: PathBuf,
        /// TrajectoryNet checkpoint (required for prehoc)
        #[arg(long = "ckpt-traj")]
        ckpt_traj: Option<PathBuf>,
        /// Write the text report here as well as printing it
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the plot-data CSV (anchor,metric,value)
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Run gradient checks and metric unit examples
    Selftest,
}

#[derive(Subcommand)]
enum SynthCmd {
    /// Generate a pilot or eval split into a directory
    Gen {
        /// pilot | eval
        #[arg(long)]
        protocol: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write raw 4-channel EMG CSVs (large)
        #[arg(long)]
        emg: bool,
        /// Optional key=value config file
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EmgCmd {
    /// Raw 4-channel EMG CSV -> 20 Hz MCL CSV
    Process {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TrainCmd {
    /// Train MCLNet on a generated dataset directory
    Mclnet {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train TrajectoryNet on a generated dataset directory
    Trajnet {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ScanCmd {
    /// Generate one scan path under a condition
    Gen {
        /// max | rnd | min
        #[arg(long)]
        condition: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "ckpt-mcl")]
        ckpt_mcl: PathBuf,
        #[arg(long = "ckpt-traj")]
        ckpt_traj: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: &Option<PathBuf>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::from_text(&fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn parse_pose(text: &str) -> Result<HeadPose> {
    let (p, y) = text
        .split_once(',')
        .ok_or_else(|| Error::InvalidInput(format!("pose must be \"pitch,yaw\", got `{text}`")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("bad pose coordinate `{v}`")))
    };
    Ok(HeadPose::new(parse(p)?, parse(y)?))
}

fn parse_protocol(text: &str) -> Result<Protocol> {
    match text {
        "pilot" => Ok(Protocol::Pilot),
        "eval" => Ok(Protocol::Eval),
        other => Err(Error::InvalidInput(format!(
            "protocol must be pilot|eval, got `{other}`"
        ))),
    }
}

fn parse_condition(text: &str) -> Result<Condition> {
    match text {
        "max" => Ok(Condition::Max),
        "rnd" => Ok(Condition::Rnd),
        "min" => Ok(Condition::Min),
        other => Err(Error::InvalidInput(format!(
            "condition must be max|rnd|min, got `{other}`"
        ))),
    }
}

fn parse_mode(text: &str) -> Result<EvalMode> {
    match text {
        "posthoc" => Ok(EvalMode::PostHoc),
        "prehoc" => Ok(EvalMode::PreHoc),
        other => Err(Error::InvalidInput(format!(
            "mode must be posthoc|prehoc, got `{other}`"
        ))),
    }
}

fn load_mclnet(path: &PathBuf) -> Result<MclNet> {
    MclNet::from_checkpoint(&Checkpoint::load(path)?)
}

fn load_trajnet(path: &PathBuf) -> Result<TrajectoryNet> {
    TrajectoryNet::from_checkpoint(&Checkpoint::load(path)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { cmd } => match cmd {
            SynthCmd::Gen {
                protocol,
                seed,
                out,
                emg,
                config,
            } => {
                let run = load_config(&config, seed)?;
                let protocol = parse_protocol(&protocol)?;
                let oracle = run.oracle_config()?;
                let dataset = gen_dataset(&oracle, protocol)?;
                io::write_dataset(&out, &dataset, &run, emg)?;
                println!(
                    "wrote {} {} sessions to {} (config hash {})",
                    dataset.sessions.len(),
                    protocol.tag(),
                    out.display(),
                    run.hash()
                );
                Ok(())
            }
        },
        Command::Emg { cmd } => match cmd {
            EmgCmd::Process { input, out, config } => {
                let run = load_config(&config, None)?;
                let record = io::read_emg(&input)?;
                let mcl = emg::process(&record, &run.pipeline)?;
                io::write_mcl(&out, &mcl)?;
                println!("wrote {} MCL samples to {}", mcl.values.len(), out.display());
                Ok(())
            }
        },
        Command::Train { cmd } => match cmd {
            TrainCmd::Mclnet {
                data,
                out,
                seed,
                config,
            } => {
                let run = load_config(&config, seed)?;
                let (dataset, _) = io::read_dataset(&data)?;
                let (net, history) =
                    workflow::train_mclnet(&dataset, &run.mcl_train, run.seed)?;
                net.to_checkpoint()?.save(&out)?;
                println!(
                    "trained MCLNet for {} epochs (loss {:.6} -> {:.6}); checkpoint {}",
                    history.len(),
                    history[0],
                    history[history.len() - 1],
                    out.display()
                );
                Ok(())
            }
            TrainCmd::Trajnet {
                data,
                out,
                seed,
                config,
            } => {
                let run = load_config(&config, seed)?;
                let (dataset, _) = io::read_dataset(&data)?;
                let (net, history) =
                    workflow::train_trajnet(&dataset, &run.traj_train, run.seed)?;
                net.to_checkpoint()?.save(&out)?;
                println!(
                    "trained TrajectoryNet for {} epochs (loss {:.6} -> {:.6}); checkpoint {}",
                    history.len(),
                    history[0],
                    history[history.len() - 1],
                    out.display()
                );
                Ok(())
            }
        },
        Command::Estimate {
            ckpt,
            trajectory,
            out,
        } => {
            let mut net = load_mclnet(&ckpt)?;
            let traj = io::read_trajectory(&trajectory)?;
            let est = net.estimate_sequence(&traj)?;
            io::write_mcl(&out, &est.mcl)?;
            println!("wrote {} MCL samples to {}", est.mcl.values.len(), out.display());
            Ok(())
        }
        Command::Predict {
            ckpt_mcl,
            ckpt_traj,
            start,
            end,
            out_profile,
        } => {
            let mut mcl_net = load_mclnet(&ckpt_mcl)?;
            let mut traj_net = load_trajnet(&ckpt_traj)?;
            let start = parse_pose(&start)?;
            let end = parse_pose(&end)?;
            let hc = cumulative_mcl(start, end, &mut traj_net, &mut mcl_net)?;
            let pair = if start == end {
                [GaussianProfile::zero(), GaussianProfile::zero()]
            } else {
                traj_net.predict_profile(start, end)?
            };
            let te = pair
                .iter()
                .filter(|p| p.amplitude != 0.0)
                .map(|p| p.center + 3.0 * p.width)
                .fold(0.0f64, f64::max);
            println!("h_c = {hc}");
            println!("t_e_s = {te}");
            for (axis, p) in ["pitch", "yaw"].iter().zip(&pair) {
                println!(
                    "{axis}: amplitude_dps = {}, center_s = {}, width_s = {}",
                    p.amplitude, p.center, p.width
                );
            }
            if let Some(path) = out_profile {
                io::write_profiles(&path, &pair)?;
            }
            Ok(())
        }
        Command::Scanpath { cmd } => match cmd {
            ScanCmd::Gen {
                condition,
                seed,
                ckpt_mcl,
                ckpt_traj,
                out,
                config,
            } => {
                let run = load_config(&config, seed)?;
                let condition = parse_condition(&condition)?;
                let mut mcl_net = load_mclnet(&ckpt_mcl)?;
                let mut traj_net = load_trajnet(&ckpt_traj)?;
                // Stream 0 drives the shared partition so all three
                // conditions of one seed rotate the same total; the
                // per-condition stream drives RND tie-breaking only.
                let mut prng = ChaCha8Rng::seed_from_u64(run.seed);
                prng.set_stream(0);
                let partition = scanpath::partition_rotation_with(
                    &mut prng,
                    run.scan_total_rotation_deg,
                    run.scan_step_count,
                    run.scan_min_step_deg,
                );
                let mut grng = ChaCha8Rng::seed_from_u64(run.seed);
                grng.set_stream(
                    1 + match condition {
                        Condition::Max => 0,
                        Condition::Rnd => 1,
                        Condition::Min => 2,
                    },
                );
                let path = scanpath::generate(
                    condition,
                    &partition,
                    &mut traj_net,
                    &mut mcl_net,
                    &mut grng,
                )?;
                io::write_scanpath(&out, &path)?;
                println!(
                    "{}: total rotation {} deg, total H_c {:.6}, coverage {:.3}",
                    condition.label(),
                    path.total_rotation(),
                    path.total_hc(),
                    scanpath::coverage_report(&path)
                );
                Ok(())
            }
        },
        Command::Evaluate {
            mode,
            data,
            ckpt_mcl,
            ckpt_traj,
            report,
            plot,
        } => {
            let mode = parse_mode(&mode)?;
            let (dataset, _) = io::read_dataset(&data)?;
            let mut mcl_net = load_mclnet(&ckpt_mcl)?;
            let mut traj_net = match (&ckpt_traj, mode) {
                (Some(p), _) => Some(load_trajnet(p)?),
                (None, EvalMode::PreHoc) => {
                    return Err(Error::InvalidInput(
                        "prehoc evaluation needs --ckpt-traj".into(),
                    ))
                }
                (None, EvalMode::PostHoc) => None,
            };
            let result =
                workflow::evaluate_model(&mut mcl_net, traj_net.as_mut(), &dataset, mode)?;
            print!("{}", result.text());
            if let Some(p) = report {
                fs::write(p, result.text())?;
            }
            if let Some(p) = plot {
                fs::write(p, result.plot_csv())?;
            }
            Ok(())
        }
        Command::Selftest => selftest(),
    }
}

fn selftest_windows() -> Vec<TrainExample> {
    (0..3)
        .map(|i| {
            let pose = HeadPose::new(5.0 * i as f64, -10.0 + 7.0 * i as f64);
            let acceleration =
                std::array::from_fn(|t| ((t as f64 - 3.0) * 20.0, (3.0 - t as f64) * 30.0));
            TrainExample {
                window: MotionWindow {
                    poses: [pose; WINDOW_LEN],
                    acceleration,
                    start: 0,
                    center: CENTER_OFFSET..CENTER_OFFSET + CENTER_LEN,
                },
                targets: [0.2, 0.3, 0.4, 0.3],
            }
        })
        .collect()
}

fn selftest_profiles() -> Vec<ProfileExample> {
    // Main-sequence-shaped targets over a small displacement grid.
    let make = |d: f64| {
        if d == 0.0 {
            return GaussianProfile::zero();
        }
        let sigma = 0.05 + 0.0035 * d.abs();
        GaussianProfile {
            amplitude: d / (sigma * (2.0 * std::f64::consts::PI).sqrt()),
            center: 3.0 * sigma,
            width: sigma,
        }
    };
    let mut out = Vec::new();
    for (sp, sy) in [(0.0, 0.0), (-10.0, 20.0)] {
        for dp in [-25.0, 15.0] {
            for dy in [-15.0, 25.0] {
                out.push(ProfileExample {
                    start: HeadPose::new(sp, sy),
                    end: HeadPose::new(sp + dp, sy + dy),
                    profiles: [make(dp), make(dy)],
                });
            }
        }
    }
    out
}

fn selftest() -> Result<()> {
    let mut failures = 0;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{}: {name} ({detail})", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    let mut mcl = MclNet::new(11);
    mcl.set_input_stats(InputStats {
        pose_mean: [0.0, 0.0],
        pose_std: [15.0, 25.0],
        accel_mean: [0.0, 0.0],
        accel_std: [100.0, 150.0],
    })?;
    let err = mcl.gradient_check(&selftest_windows())?;
    check("MCLNet composed gradient check", err < 1e-4, format!("max rel err {err:.2e}"));

    let mut traj = TrajectoryNet::new(9);
    let profiles = selftest_profiles();
    traj.stats = Some(TrajectoryNet::compute_stats(&profiles));
    let err = traj.gradient_check(&profiles[..4])?;
    check(
        "TrajectoryNet composed gradient check",
        err < 1e-4,
        format!("max rel err {err:.2e}"),
    );

    let v = metrics::nrmse(&[1.0, 0.0], &[0.0, 1.0])?;
    check("nrmse opposite unit ramp = 100%", (v - 100.0).abs() < 1e-9, format!("{v}"));
    let v = metrics::nrmse(&[0.1, 1.1, 2.1], &[0.0, 1.0, 2.0])?;
    check("nrmse constant 0.1 offset over range 2 = 5%", (v - 5.0).abs() < 1e-9, format!("{v}"));
    let v = metrics::nmae(&[0.5, 0.5], &[0.0, 1.0])?;
    check("nmae midpoint = 50%", (v - 50.0).abs() < 1e-9, format!("{v}"));
    let x = [1.0, 2.0, 3.0, 4.0];
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
    let r = metrics::pearson(&x, &y)?;
    check("pearson of y=2x+1 = 1", (r - 1.0).abs() < 1e-9, format!("{r}"));
    let xc = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let yc: Vec<f64> = xc.iter().map(|v| v * v * v).collect();
    let rho = metrics::spearman(&xc, &yc)?;
    let r = metrics::pearson(&xc, &yc)?;
    check(
        "spearman of y=x^3 = 1 with pearson < 1",
        (rho - 1.0).abs() < 1e-9 && r < 1.0,
        format!("rho {rho}, r {r}"),
    );
    let rho = metrics::spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0])?;
    check("spearman with ties = 1", (rho - 1.0).abs() < 1e-9, format!("{rho}"));

    if failures > 0 {
        Err(Error::State(format!("selftest: {failures} check(s) failed")))
    } else {
        println!("selftest: all checks passed");
        Ok(())
    }
}

fn main() {
    // Die quietly when stdout is a closed pipe (e.g. `neckmcl ... | head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!(
            "error: code={} kind={} message=\"{}\"",
            e.code(),
            e.code_name(),
            e
        );
        std::process::exit(e.code());
    }
}
