//! Flat key=value run configuration: one documented default per field,
//! unknown keys rejected, canonical serialization, and a stable FNV-1a
//! content hash recorded in dataset manifests.

use crate::emg::{Normalization, PipelineConfig};
use crate::error::{Error, Result};
use crate::mclnet::MclTrainConfig;
use crate::oracle::{calibrate, CalibrationTargets, OracleConfig};
use crate::trajnet::TrajTrainConfig;
use std::collections::BTreeMap;

/// Every knob a run exposes. Oracle stationary-map gains are not part of
/// the config: they are produced deterministically by calibration from
/// the seed, so (seed, config) fully determines every output.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub oracle_inertia: f64,
    pub oracle_sigma0_s: f64,
    pub oracle_sigma_per_deg: f64,
    pub oracle_velocity_jitter: f64,
    pub oracle_velocity_noise_dps: f64,
    pub oracle_emg_modulation_depth: f64,
    pub oracle_gain_low: f64,
    pub oracle_gain_high: f64,
    pub oracle_drift_amplitude_mv: f64,
    pub oracle_drift_max_hz: f64,
    pub pipeline: PipelineConfig,
    pub mcl_train: MclTrainConfig,
    pub traj_train: TrajTrainConfig,
    pub scan_total_rotation_deg: f64,
    pub scan_step_count: usize,
    pub scan_min_step_deg: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let oracle = OracleConfig::new(0);
        RunConfig {
            seed: 0,
            oracle_inertia: oracle.inertia,
            oracle_sigma0_s: oracle.sigma0_s,
            oracle_sigma_per_deg: oracle.sigma_per_deg,
            oracle_velocity_jitter: oracle.velocity_jitter,
            oracle_velocity_noise_dps: oracle.velocity_noise_dps,
            oracle_emg_modulation_depth: oracle.emg_modulation_depth,
            oracle_gain_low: oracle.channel_gain_range.0,
            oracle_gain_high: oracle.channel_gain_range.1,
            oracle_drift_amplitude_mv: oracle.drift_amplitude_mv,
            oracle_drift_max_hz: oracle.drift_max_hz,
            pipeline: PipelineConfig::default(),
            mcl_train: MclTrainConfig::default(),
            traj_train: TrajTrainConfig::default(),
            scan_total_rotation_deg: crate::scanpath::TOTAL_ROTATION_DEG,
            scan_step_count: crate::scanpath::STEP_COUNT,
            scan_min_step_deg: crate::scanpath::MIN_STEP_DEG,
        }
    }
}

impl RunConfig {
    pub fn with_seed(seed: u64) -> Self {
        RunConfig {
            seed,
            ..RunConfig::default()
        }
    }

    /// Calibrate the oracle for this seed, then apply the config's motion
    /// and EMG knobs (which do not affect the stationary-map fit).
    pub fn oracle_config(&self) -> Result<OracleConfig> {
        let mut cfg = calibrate(self.seed, &CalibrationTargets::default())?;
        cfg.inertia = self.oracle_inertia;
        cfg.sigma0_s = self.oracle_sigma0_s;
        cfg.sigma_per_deg = self.oracle_sigma_per_deg;
        cfg.velocity_jitter = self.oracle_velocity_jitter;
        cfg.velocity_noise_dps = self.oracle_velocity_noise_dps;
        cfg.emg_modulation_depth = self.oracle_emg_modulation_depth;
        cfg.channel_gain_range = (self.oracle_gain_low, self.oracle_gain_high);
        cfg.drift_amplitude_mv = self.oracle_drift_amplitude_mv;
        cfg.drift_max_hz = self.oracle_drift_max_hz;
        Ok(cfg)
    }

    /// Canonical `key = value` text: sorted keys, one per line. Parsing
    /// this text back yields an equal config, and the manifest hash is
    /// computed over exactly these bytes.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    /// FNV-1a 64-bit hash of the canonical text, as fixed-width hex.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_text().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let norm = match self.pipeline.normalization {
            Normalization::MinMax => "minmax".to_string(),
            Normalization::Percentile { lower, upper } => format!("percentile:{lower}:{upper}"),
        };
        vec![
            ("oracle.drift_amplitude_mv", self.oracle_drift_amplitude_mv.to_string()),
            ("oracle.drift_max_hz", self.oracle_drift_max_hz.to_string()),
            ("oracle.emg_modulation_depth", self.oracle_emg_modulation_depth.to_string()),
            ("oracle.gain_high", self.oracle_gain_high.to_string()),
            ("oracle.gain_low", self.oracle_gain_low.to_string()),
            ("oracle.inertia", self.oracle_inertia.to_string()),
            ("oracle.sigma0_s", self.oracle_sigma0_s.to_string()),
            ("oracle.sigma_per_deg", self.oracle_sigma_per_deg.to_string()),
            ("oracle.velocity_jitter", self.oracle_velocity_jitter.to_string()),
            ("oracle.velocity_noise_dps", self.oracle_velocity_noise_dps.to_string()),
            ("pipeline.band_high_hz", self.pipeline.band_high_hz.to_string()),
            ("pipeline.band_low_hz", self.pipeline.band_low_hz.to_string()),
            ("pipeline.detrend_window_s", self.pipeline.detrend_window_s.to_string()),
            ("pipeline.envelope_window_s", self.pipeline.envelope_window_s.to_string()),
            ("pipeline.filter_order", self.pipeline.filter_order.to_string()),
            ("pipeline.normalization", norm),
            ("pipeline.output_rate_hz", self.pipeline.output_rate_hz.to_string()),
            ("scanpath.min_step_deg", self.scan_min_step_deg.to_string()),
            ("scanpath.step_count", self.scan_step_count.to_string()),
            ("scanpath.total_rotation_deg", self.scan_total_rotation_deg.to_string()),
            ("seed", self.seed.to_string()),
            ("train.mclnet.batch_size", self.mcl_train.batch_size.to_string()),
            ("train.mclnet.epochs", self.mcl_train.epochs.to_string()),
            ("train.mclnet.learning_rate", self.mcl_train.learning_rate.to_string()),
            ("train.mclnet.lr_drop_epoch", self.mcl_train.lr_drop_epoch.to_string()),
            ("train.mclnet.lr_drop_factor", self.mcl_train.lr_drop_factor.to_string()),
            ("train.mclnet.weight_decay", self.mcl_train.weight_decay.to_string()),
            ("train.trajnet.batch_size", self.traj_train.batch_size.to_string()),
            ("train.trajnet.epochs", self.traj_train.epochs.to_string()),
            ("train.trajnet.learning_rate", self.traj_train.learning_rate.to_string()),
            ("train.trajnet.lr_drop_epoch", self.traj_train.lr_drop_epoch.to_string()),
            ("train.trajnet.lr_drop_factor", self.traj_train.lr_drop_factor.to_string()),
            ("train.trajnet.weight_decay", self.traj_train.weight_decay.to_string()),
        ]
    }

    /// Parse `key = value` text. Missing keys keep their defaults;
    /// unknown keys, duplicates, or unparsable values are rejected.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidInput(format!("config line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim().to_string();
            if map
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::InvalidInput(format!("duplicate config key `{key}`")));
            }
        }
        let mut cfg = RunConfig::default();
        let take_f64 = |map: &mut BTreeMap<String, String>, key: &str, slot: &mut f64| {
            if let Some(v) = map.remove(key) {
                *slot = v.parse().map_err(|_| {
                    Error::InvalidInput(format!("config key `{key}`: bad number `{v}`"))
                })?;
            }
            Ok::<(), Error>(())
        };
        take_f64(&mut map, "oracle.drift_amplitude_mv", &mut cfg.oracle_drift_amplitude_mv)?;
        take_f64(&mut map, "oracle.drift_max_hz", &mut cfg.oracle_drift_max_hz)?;
        take_f64(&mut map, "oracle.emg_modulation_depth", &mut cfg.oracle_emg_modulation_depth)?;
        take_f64(&mut map, "oracle.gain_high", &mut cfg.oracle_gain_high)?;
        take_f64(&mut map, "oracle.gain_low", &mut cfg.oracle_gain_low)?;
        take_f64(&mut map, "oracle.inertia", &mut cfg.oracle_inertia)?;
        take_f64(&mut map, "oracle.sigma0_s", &mut cfg.oracle_sigma0_s)?;
        take_f64(&mut map, "oracle.sigma_per_deg", &mut cfg.oracle_sigma_per_deg)?;
        take_f64(&mut map, "oracle.velocity_jitter", &mut cfg.oracle_velocity_jitter)?;
        take_f64(&mut map, "oracle.velocity_noise_dps", &mut cfg.oracle_velocity_noise_dps)?;
        take_f64(&mut map, "pipeline.band_high_hz", &mut cfg.pipeline.band_high_hz)?;
        take_f64(&mut map, "pipeline.band_low_hz", &mut cfg.pipeline.band_low_hz)?;
        take_f64(&mut map, "pipeline.detrend_window_s", &mut cfg.pipeline.detrend_window_s)?;
        take_f64(&mut map, "pipeline.envelope_window_s", &mut cfg.pipeline.envelope_window_s)?;
        take_f64(&mut map, "pipeline.output_rate_hz", &mut cfg.pipeline.output_rate_hz)?;
        take_f64(&mut map, "scanpath.min_step_deg", &mut cfg.scan_min_step_deg)?;
        take_f64(&mut map, "scanpath.total_rotation_deg", &mut cfg.scan_total_rotation_deg)?;
        take_f64(&mut map, "train.mclnet.learning_rate", &mut cfg.mcl_train.learning_rate)?;
        take_f64(&mut map, "train.mclnet.lr_drop_factor", &mut cfg.mcl_train.lr_drop_factor)?;
        take_f64(&mut map, "train.mclnet.weight_decay", &mut cfg.mcl_train.weight_decay)?;
        take_f64(&mut map, "train.trajnet.learning_rate", &mut cfg.traj_train.learning_rate)?;
        take_f64(&mut map, "train.trajnet.lr_drop_factor", &mut cfg.traj_train.lr_drop_factor)?;
        take_f64(&mut map, "train.trajnet.weight_decay", &mut cfg.traj_train.weight_decay)?;
        let take_usize = |map: &mut BTreeMap<String, String>, key: &str, slot: &mut usize| {
            if let Some(v) = map.remove(key) {
                *slot = v.parse().map_err(|_| {
                    Error::InvalidInput(format!("config key `{key}`: bad integer `{v}`"))
                })?;
            }
            Ok::<(), Error>(())
        };
        take_usize(&mut map, "pipeline.filter_order", &mut cfg.pipeline.filter_order)?;
        take_usize(&mut map, "scanpath.step_count", &mut cfg.scan_step_count)?;
        take_usize(&mut map, "train.mclnet.batch_size", &mut cfg.mcl_train.batch_size)?;
        take_usize(&mut map, "train.mclnet.epochs", &mut cfg.mcl_train.epochs)?;
        take_usize(&mut map, "train.mclnet.lr_drop_epoch", &mut cfg.mcl_train.lr_drop_epoch)?;
        take_usize(&mut map, "train.trajnet.batch_size", &mut cfg.traj_train.batch_size)?;
        take_usize(&mut map, "train.trajnet.epochs", &mut cfg.traj_train.epochs)?;
        take_usize(&mut map, "train.trajnet.lr_drop_epoch", &mut cfg.traj_train.lr_drop_epoch)?;
        if let Some(v) = map.remove("seed") {
            cfg.seed = v.parse().map_err(|_| {
                Error::InvalidInput(format!("config key `seed`: bad integer `{v}`"))
            })?;
        }
        if let Some(v) = map.remove("pipeline.normalization") {
            cfg.pipeline.normalization = if v == "minmax" {
                Normalization::MinMax
            } else if let Some(rest) = v.strip_prefix("percentile:") {
                let parts: Vec<&str> = rest.split(':').collect();
                let bounds: Option<(f64, f64)> = match parts.as_slice() {
                    [lo, hi] => lo.parse().ok().zip(hi.parse().ok()),
                    _ => None,
                };
                let (lower, upper) = bounds.ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "config key `pipeline.normalization`: bad percentile value `{v}`"
                    ))
                })?;
                Normalization::Percentile { lower, upper }
            } else {
                return Err(Error::InvalidInput(format!(
                    "config key `pipeline.normalization`: expected minmax|percentile:LO:HI, got `{v}`"
                )));
            };
        }
        if let Some((key, _)) = map.into_iter().next() {
            return Err(Error::InvalidInput(format!("unknown config key `{key}`")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.oracle_sigma0_s > 0.0
            && self.oracle_sigma_per_deg > 0.0
            && self.oracle_inertia > 0.0
            && self.oracle_gain_low > 0.0
            && self.oracle_gain_high > self.oracle_gain_low
            && self.pipeline.band_low_hz > 0.0
            && self.pipeline.band_high_hz > self.pipeline.band_low_hz
            && self.pipeline.filter_order >= 2
            && self.pipeline.output_rate_hz > 0.0
            && self.scan_step_count >= 2
            && self.scan_min_step_deg > 0.0
            && self.scan_total_rotation_deg >= self.scan_min_step_deg * self.scan_step_count as f64
            && self.mcl_train.epochs > 0
            && self.mcl_train.batch_size > 0
            && self.traj_train.epochs > 0
            && self.traj_train.batch_size > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("invalid run config".into()))
        }
    }
}
