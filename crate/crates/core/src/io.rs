//! CSV and dataset-directory I/O. All writers format floats with Rust's
//! shortest round-trip notation, so identical data yields byte-identical
//! files.

use crate::config::RunConfig;
use crate::emg::{MclSequence, RawEmgRecord, EMG_RATE_HZ};
use crate::error::{Error, Result};
use crate::kinematics::{HeadPose, TimedTrajectory};
use crate::oracle::{Protocol, Session, SyntheticDataset};
use crate::scanpath::ScanPath;
use crate::trajnet::GaussianProfile;
use std::fs;
use std::path::Path;

pub const TRAJECTORY_HEADER: &str = "t_s,pitch_deg,yaw_deg";
pub const EMG_HEADER: &str = "t_s,l_scm_mv,r_scm_mv,l_sc_mv,r_sc_mv";
pub const MCL_HEADER: &str = "t_s,mcl";
pub const PROFILE_HEADER: &str = "axis,amplitude_dps,center_s,width_s";
pub const SCANPATH_HEADER: &str = "step,pitch_deg,yaw_deg,step_rotation_deg,hc";
pub const MANIFEST_HEADER: &str = "session,split,anchor_pitch_deg,anchor_yaw_deg,\
target_pitch_deg,target_yaw_deg,movement_start,movement_end,stream,\
trajectory_file,mcl_file,emg_file,config_hash";

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("{what}: bad number `{field}`")))
}

fn parse_usize(field: &str, what: &str) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("{what}: bad integer `{field}`")))
}

/// Read a CSV file into (header-checked) rows of string fields.
fn read_rows(path: &Path, expected_header: &str) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: empty file", path.display())))?;
    if header.trim() != expected_header {
        return Err(Error::Format(format!(
            "{}: expected header `{expected_header}`, got `{header}`",
            path.display()
        )));
    }
    let ncols = expected_header.split(',').count();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|f| f.trim().to_string()).collect();
        if fields.len() != ncols {
            return Err(Error::Format(format!(
                "{}: row {}: expected {ncols} fields, got {}",
                path.display(),
                i + 2,
                fields.len()
            )));
        }
        rows.push(fields);
    }
    Ok(rows)
}

/// Sample rate inferred from the first two time stamps, validated over
/// the full column.
fn infer_rate(times: &[f64], path: &Path) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::Format(format!(
            "{}: need at least 2 rows to infer the sample rate",
            path.display()
        )));
    }
    let dt = times[1] - times[0];
    if dt <= 0.0 {
        return Err(Error::Format(format!(
            "{}: time stamps must be strictly increasing",
            path.display()
        )));
    }
    for (k, w) in times.windows(2).enumerate() {
        if (w[1] - w[0] - dt).abs() > 1e-6 {
            return Err(Error::Format(format!(
                "{}: non-uniform time step at row {}",
                path.display(),
                k + 3
            )));
        }
    }
    Ok(1.0 / dt)
}

pub fn write_trajectory(path: &Path, traj: &TimedTrajectory) -> Result<()> {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    let dt = 1.0 / traj.sample_rate;
    for (k, p) in traj.poses.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", k as f64 * dt, p.pitch, p.yaw));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<TimedTrajectory> {
    let rows = read_rows(path, TRAJECTORY_HEADER)?;
    let times: Vec<f64> = rows
        .iter()
        .map(|r| parse_f64(&r[0], "t_s"))
        .collect::<Result<_>>()?;
    let rate = infer_rate(&times, path)?;
    let poses = rows
        .iter()
        .map(|r| {
            Ok(HeadPose::new(
                parse_f64(&r[1], "pitch_deg")?,
                parse_f64(&r[2], "yaw_deg")?,
            ))
        })
        .collect::<Result<_>>()?;
    TimedTrajectory::new(rate, poses)
}

pub fn write_mcl(path: &Path, mcl: &MclSequence) -> Result<()> {
    let mut out = String::from(MCL_HEADER);
    out.push('\n');
    let dt = 1.0 / mcl.sample_rate;
    for (k, v) in mcl.values.iter().enumerate() {
        out.push_str(&format!("{},{}\n", k as f64 * dt, v));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_mcl(path: &Path) -> Result<MclSequence> {
    let rows = read_rows(path, MCL_HEADER)?;
    let times: Vec<f64> = rows
        .iter()
        .map(|r| parse_f64(&r[0], "t_s"))
        .collect::<Result<_>>()?;
    let rate = infer_rate(&times, path)?;
    let values = rows
        .iter()
        .map(|r| parse_f64(&r[1], "mcl"))
        .collect::<Result<_>>()?;
    Ok(MclSequence {
        sample_rate: rate,
        values,
    })
}

pub fn write_emg(path: &Path, emg: &RawEmgRecord) -> Result<()> {
    let mut out = String::from(EMG_HEADER);
    out.push('\n');
    let dt = 1.0 / emg.sample_rate;
    for k in 0..emg.channels[0].len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            k as f64 * dt,
            emg.channels[0][k],
            emg.channels[1][k],
            emg.channels[2][k],
            emg.channels[3][k]
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_emg(path: &Path) -> Result<RawEmgRecord> {
    let rows = read_rows(path, EMG_HEADER)?;
    let times: Vec<f64> = rows
        .iter()
        .map(|r| parse_f64(&r[0], "t_s"))
        .collect::<Result<_>>()?;
    let rate = infer_rate(&times, path)?;
    let mut channels: [Vec<f64>; 4] = Default::default();
    for r in &rows {
        for c in 0..4 {
            channels[c].push(parse_f64(&r[c + 1], EMG_HEADER.split(',').nth(c + 1).unwrap())?);
        }
    }
    RawEmgRecord::new(rate, channels)
}

pub fn write_profiles(path: &Path, pair: &[GaussianProfile; 2]) -> Result<()> {
    let mut out = String::from(PROFILE_HEADER);
    out.push('\n');
    for (axis, p) in ["pitch", "yaw"].iter().zip(pair) {
        out.push_str(&format!(
            "{axis},{},{},{}\n",
            p.amplitude, p.center, p.width
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_profiles(path: &Path) -> Result<[GaussianProfile; 2]> {
    let rows = read_rows(path, PROFILE_HEADER)?;
    if rows.len() != 2 || rows[0][0] != "pitch" || rows[1][0] != "yaw" {
        return Err(Error::Format(format!(
            "{}: expected exactly a pitch row then a yaw row",
            path.display()
        )));
    }
    let mut pair = [GaussianProfile::zero(), GaussianProfile::zero()];
    for (k, r) in rows.iter().enumerate() {
        pair[k] = GaussianProfile {
            amplitude: parse_f64(&r[1], "amplitude_dps")?,
            center: parse_f64(&r[2], "center_s")?,
            width: parse_f64(&r[3], "width_s")?,
        };
    }
    Ok(pair)
}

/// Write a scan path: row 0 is the starting pose with zero rotation and
/// zero H_c, then one row per step.
pub fn write_scanpath(path: &Path, sp: &ScanPath) -> Result<()> {
    let mut out = String::from(SCANPATH_HEADER);
    out.push('\n');
    for (k, p) in sp.poses.iter().enumerate() {
        let (rot, hc) = if k == 0 {
            (0.0, 0.0)
        } else {
            (sp.step_rotation[k - 1], sp.hc[k - 1])
        };
        out.push_str(&format!("{k},{},{},{rot},{hc}\n", p.pitch, p.yaw));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write a generated dataset: `manifest.csv`, `config.txt`, and one
/// trajectory + MCL CSV per session (plus raw EMG when `include_emg`).
pub fn write_dataset(
    dir: &Path,
    dataset: &SyntheticDataset,
    run: &RunConfig,
    include_emg: bool,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.txt"), run.to_text())?;
    let hash = run.hash();
    let mut manifest = String::from(MANIFEST_HEADER);
    manifest.push('\n');
    for (i, s) in dataset.sessions.iter().enumerate() {
        let stem = format!("session_{i:03}");
        let traj_file = format!("{stem}_trajectory.csv");
        let mcl_file = format!("{stem}_mcl.csv");
        write_trajectory(&dir.join(&traj_file), &s.trajectory)?;
        write_mcl(&dir.join(&mcl_file), &s.mcl)?;
        let emg_file = if include_emg {
            let f = format!("{stem}_emg.csv");
            write_emg(&dir.join(&f), &s.emg)?;
            f
        } else {
            String::new()
        };
        manifest.push_str(&format!(
            "{i},{},{},{},{},{},{},{},{},{traj_file},{mcl_file},{emg_file},{hash}\n",
            dataset.protocol.tag(),
            s.anchor.pitch,
            s.anchor.yaw,
            s.target.pitch,
            s.target.yaw,
            s.movement_start,
            s.movement_end,
            s.stream
        ));
    }
    fs::write(dir.join("manifest.csv"), manifest)?;
    Ok(())
}

/// Read a dataset directory back. Sessions without an EMG file get an
/// empty EMG record. Returns the dataset and the manifest's config hash.
pub fn read_dataset(dir: &Path) -> Result<(SyntheticDataset, String)> {
    let manifest_path = dir.join("manifest.csv");
    let rows = read_rows(&manifest_path, MANIFEST_HEADER)?;
    if rows.is_empty() {
        return Err(Error::Format(format!(
            "{}: no sessions listed",
            manifest_path.display()
        )));
    }
    let run = RunConfig::from_text(&fs::read_to_string(dir.join("config.txt"))?)?;
    let mut protocol = None;
    let mut hash = None;
    let mut sessions = Vec::with_capacity(rows.len());
    for r in &rows {
        let split = match r[1].as_str() {
            "train" => Protocol::Pilot,
            "eval" => Protocol::Eval,
            other => {
                return Err(Error::Format(format!(
                    "manifest split must be train|eval, got `{other}`"
                )))
            }
        };
        match protocol {
            None => protocol = Some(split),
            Some(p) if p != split => {
                return Err(Error::Format("manifest mixes train and eval splits".into()))
            }
            _ => {}
        }
        match &hash {
            None => hash = Some(r[12].clone()),
            Some(h) if *h != r[12] => {
                return Err(Error::Format("manifest mixes config hashes".into()))
            }
            _ => {}
        }
        let trajectory = read_trajectory(&dir.join(&r[9]))?;
        let mcl = read_mcl(&dir.join(&r[10]))?;
        let emg = if r[11].is_empty() {
            // No EMG on disk; evaluation and training do not need it.
            RawEmgRecord {
                sample_rate: EMG_RATE_HZ,
                channels: Default::default(),
            }
        } else {
            read_emg(&dir.join(&r[11]))?
        };
        sessions.push(Session {
            anchor: HeadPose::new(
                parse_f64(&r[2], "anchor_pitch_deg")?,
                parse_f64(&r[3], "anchor_yaw_deg")?,
            ),
            target: HeadPose::new(
                parse_f64(&r[4], "target_pitch_deg")?,
                parse_f64(&r[5], "target_yaw_deg")?,
            ),
            movement_start: parse_usize(&r[6], "movement_start")?,
            movement_end: parse_usize(&r[7], "movement_end")?,
            trajectory,
            mcl,
            emg,
            stream: r[8]
                .parse()
                .map_err(|_| Error::Format(format!("bad stream `{}`", r[8])))?,
        });
    }
    let hash = hash.unwrap();
    if run.hash() != hash {
        return Err(Error::Format(
            "config.txt does not match the manifest's config hash".into(),
        ));
    }
    Ok((
        SyntheticDataset {
            protocol: protocol.unwrap(),
            seed: run.seed,
            sessions,
        },
        hash,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::MODEL_RATE_HZ;
    use crate::oracle::{calibrate, gen_dataset, CalibrationTargets};
    use tempfile::tempdir;

    #[test]
    fn trajectory_round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let traj = TimedTrajectory::new(
            MODEL_RATE_HZ,
            vec![
                HeadPose::new(0.1, -0.2),
                HeadPose::new(1.0 / 3.0, 2.5),
                HeadPose::new(-7.25, 49.999999999),
            ],
        )
        .unwrap();
        write_trajectory(&path, &traj).unwrap();
        let back = read_trajectory(&path).unwrap();
        assert_eq!(back.poses, traj.poses);
        assert!((back.sample_rate - MODEL_RATE_HZ).abs() < 1e-9);
    }

    #[test]
    fn mcl_and_profile_round_trips() {
        let dir = tempdir().unwrap();
        let mcl = MclSequence {
            sample_rate: 20.0,
            values: vec![0.17, 0.25, 1.0 / 7.0],
        };
        let p = dir.path().join("m.csv");
        write_mcl(&p, &mcl).unwrap();
        assert_eq!(read_mcl(&p).unwrap().values, mcl.values);

        let pair = [
            GaussianProfile {
                amplitude: 42.5,
                center: 0.45,
                width: 0.15,
            },
            GaussianProfile::zero(),
        ];
        let pp = dir.path().join("p.csv");
        write_profiles(&pp, &pair).unwrap();
        assert_eq!(read_profiles(&pp).unwrap(), pair);
    }

    #[test]
    fn malformed_header_is_format_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "time,p,y\n0,0,0\n").unwrap();
        assert!(matches!(read_trajectory(&path), Err(Error::Format(_))));
    }

    #[test]
    fn non_uniform_time_is_format_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            "t_s,pitch_deg,yaw_deg\n0,0,0\n0.05,1,1\n0.2,2,2\n",
        )
        .unwrap();
        assert!(matches!(read_trajectory(&path), Err(Error::Format(_))));
    }

    #[test]
    fn dataset_round_trip() {
        let mut cfg = calibrate(5, &CalibrationTargets::default()).unwrap();
        cfg.seed = 5;
        let mut dataset = gen_dataset(&cfg, Protocol::Eval).unwrap();
        dataset.sessions.truncate(3);
        let run = RunConfig::with_seed(5);
        let dir = tempdir().unwrap();
        write_dataset(dir.path(), &dataset, &run, true).unwrap();
        let (back, hash) = read_dataset(dir.path()).unwrap();
        assert_eq!(hash, run.hash());
        assert_eq!(back.protocol, Protocol::Eval);
        assert_eq!(back.sessions.len(), 3);
        for (a, b) in back.sessions.iter().zip(&dataset.sessions) {
            assert_eq!(a.anchor, b.anchor);
            assert_eq!(a.target, b.target);
            assert_eq!(a.movement_start, b.movement_start);
            assert_eq!(a.movement_end, b.movement_end);
            assert_eq!(a.trajectory.poses, b.trajectory.poses);
            assert_eq!(a.mcl.values, b.mcl.values);
            assert_eq!(a.emg.channels, b.emg.channels);
            assert_eq!(a.stream, b.stream);
        }
    }

    #[test]
    fn dataset_write_is_deterministic() {
        let mut cfg = calibrate(9, &CalibrationTargets::default()).unwrap();
        cfg.seed = 9;
        let mut dataset = gen_dataset(&cfg, Protocol::Eval).unwrap();
        dataset.sessions.truncate(2);
        let run = RunConfig::with_seed(9);
        let d1 = tempdir().unwrap();
        let d2 = tempdir().unwrap();
        write_dataset(d1.path(), &dataset, &run, false).unwrap();
        write_dataset(d2.path(), &dataset, &run, false).unwrap();
        for name in ["manifest.csv", "config.txt", "session_000_trajectory.csv"] {
            assert_eq!(
                std::fs::read(d1.path().join(name)).unwrap(),
                std::fs::read(d2.path().join(name)).unwrap(),
                "{name} differs"
            );
        }
    }

    #[test]
    fn scanpath_csv_shape() {
        let dir = tempdir().unwrap();
        let sp = ScanPath {
            condition: crate::scanpath::Condition::Rnd,
            poses: vec![HeadPose::new(0.0, 0.0), HeadPose::new(5.0, 5.0)],
            step_rotation: vec![7.0710678118654755],
            hc: vec![0.123],
            adjusted_steps: vec![],
        };
        let p = dir.path().join("sp.csv");
        write_scanpath(&p, &sp).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), SCANPATH_HEADER);
        assert_eq!(lines.next().unwrap(), "0,0,0,0,0");
        assert!(lines.next().unwrap().starts_with("1,5,5,7.0710678118654755,"));
    }
}
