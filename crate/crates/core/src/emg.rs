//! Raw 4-channel EMG to normalized muscle contraction level (MCL).
//!
//! Pipeline: detrend -> band-pass -> rectify + envelope -> inter-channel
//! balancing + integration -> per-user min/max normalization, output at
//! 20 Hz.

use crate::dsp::{block_average, moving_mean, moving_rms, SosFilter};
use crate::error::{Error, Result};

/// Raw EMG acquisition rate.
pub const EMG_RATE_HZ: f64 = 2000.0;

/// Which muscle a channel was recorded from. SCM rotates the head to the
/// opposite side, SC to the same side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelRole {
    LeftScm,
    RightScm,
    LeftSc,
    RightSc,
}

impl ChannelRole {
    pub const ALL: [ChannelRole; 4] = [
        ChannelRole::LeftScm,
        ChannelRole::RightScm,
        ChannelRole::LeftSc,
        ChannelRole::RightSc,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ChannelRole::LeftScm => "L-SCM",
            ChannelRole::RightScm => "R-SCM",
            ChannelRole::LeftSc => "L-SC",
            ChannelRole::RightSc => "R-SC",
        }
    }
}

/// 4-channel raw EMG in mV, channel order `[L-SCM, R-SCM, L-SC, R-SC]`.
#[derive(Debug, Clone)]
pub struct RawEmgRecord {
    pub sample_rate: f64,
    pub channels: [Vec<f64>; 4],
}

impl RawEmgRecord {
    pub fn new(sample_rate: f64, channels: [Vec<f64>; 4]) -> Result<Self> {
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::InvalidInput(
                "EMG channels must have equal length".into(),
            ));
        }
        if len == 0 {
            return Err(Error::InvalidInput("empty EMG record".into()));
        }
        Ok(RawEmgRecord {
            sample_rate,
            channels,
        })
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Normalized contraction level sequence; values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct MclSequence {
    pub sample_rate: f64,
    pub values: Vec<f64>,
}

/// Per-user session min/max of the integrated signal, the reference frame
/// for normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserStats {
    pub min: f64,
    pub max: f64,
}

/// How the integrated signal is mapped to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// Linear min/max over the session, clipped.
    MinMax,
    /// Robust variant: the given lower/upper percentiles stand in for
    /// min/max.
    Percentile { lower: f64, upper: f64 },
}

/// Pipeline parameters. Defaults follow common surface-EMG practice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub filter_order: usize,
    pub detrend_window_s: f64,
    pub envelope_window_s: f64,
    pub output_rate_hz: f64,
    pub normalization: Normalization,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            band_low_hz: 20.0,
            band_high_hz: 450.0,
            filter_order: 4,
            detrend_window_s: 1.0,
            envelope_window_s: 0.1,
            output_rate_hz: 20.0,
            normalization: Normalization::MinMax,
        }
    }
}

/// Remove DC and slow drift by subtracting a moving mean (1 s by default).
pub fn detrend(channel: &[f64], sample_rate: f64, window_s: f64) -> Result<Vec<f64>> {
    if channel.is_empty() {
        return Err(Error::InvalidInput("empty channel".into()));
    }
    let w = ((window_s * sample_rate) as usize).max(1);
    let mean = moving_mean(channel, w);
    Ok(channel.iter().zip(&mean).map(|(x, m)| x - m).collect())
}

/// Zero-phase Butterworth band-pass.
pub fn bandpass(
    channel: &[f64],
    sample_rate: f64,
    low: f64,
    high: f64,
    order: usize,
) -> Result<Vec<f64>> {
    let filter = SosFilter::butterworth_bandpass(order, low, high, sample_rate)?;
    Ok(filter.filtfilt(channel))
}

/// Full-wave rectification followed by a moving-RMS envelope (100 ms by
/// default).
pub fn rectify_envelope(channel: &[f64], sample_rate: f64, window_s: f64) -> Vec<f64> {
    let rect: Vec<f64> = channel.iter().map(|v| v.abs()).collect();
    let w = ((window_s * sample_rate) as usize).max(1);
    moving_rms(&rect, w)
}

/// Rescale each right-side channel so its session mean matches its
/// left-side partner (SCM pair, SC pair), then sum the 4 channels per
/// sample.
pub fn balance_and_integrate(envelopes: &[Vec<f64>; 4]) -> Result<Vec<f64>> {
    let means: Vec<f64> = envelopes
        .iter()
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    for (i, &m) in means.iter().enumerate() {
        if m == 0.0 {
            return Err(Error::DegenerateChannel(
                ChannelRole::ALL[i].label().to_string(),
            ));
        }
    }
    // Channel order: [L-SCM, R-SCM, L-SC, R-SC].
    let scale_r_scm = means[0] / means[1];
    let scale_r_sc = means[2] / means[3];
    let n = envelopes[0].len();
    let mut total = Vec::with_capacity(n);
    for t in 0..n {
        total.push(
            envelopes[0][t]
                + envelopes[1][t] * scale_r_scm
                + envelopes[2][t]
                + envelopes[3][t] * scale_r_sc,
        );
    }
    Ok(total)
}

/// Session statistics for normalization.
pub fn session_stats(integrated: &[f64], normalization: Normalization) -> Result<UserStats> {
    if integrated.is_empty() {
        return Err(Error::InvalidInput("empty signal".into()));
    }
    let (min, max) = match normalization {
        Normalization::MinMax => {
            let min = integrated.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = integrated.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (min, max)
        }
        Normalization::Percentile { lower, upper } => {
            let mut sorted = integrated.to_vec();
            sorted.sort_by(f64::total_cmp);
            let pick = |p: f64| {
                let idx = ((p / 100.0) * (sorted.len() - 1) as f64).round() as usize;
                sorted[idx.min(sorted.len() - 1)]
            };
            (pick(lower), pick(upper))
        }
    };
    if !(max > min) {
        return Err(Error::DegenerateSession);
    }
    Ok(UserStats { min, max })
}

/// Map to [0, 1] with the user's session min/max, clip, and downsample to
/// the output rate by block averaging.
pub fn normalize_user(
    integrated: &[f64],
    stats: UserStats,
    sample_rate: f64,
    output_rate: f64,
) -> Result<MclSequence> {
    if !(stats.max > stats.min) {
        return Err(Error::DegenerateSession);
    }
    let range = stats.max - stats.min;
    let normalized: Vec<f64> = integrated
        .iter()
        .map(|v| ((v - stats.min) / range).clamp(0.0, 1.0))
        .collect();
    let factor = (sample_rate / output_rate).round() as usize;
    if factor < 1 || (sample_rate / output_rate - factor as f64).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "output rate {output_rate} must divide sample rate {sample_rate}"
        )));
    }
    Ok(MclSequence {
        sample_rate: output_rate,
        values: block_average(&normalized, factor),
    })
}

/// Per-channel stages up to the envelope.
fn channel_envelope(channel: &[f64], rate: f64, cfg: &PipelineConfig) -> Result<Vec<f64>> {
    let d = detrend(channel, rate, cfg.detrend_window_s)?;
    let f = bandpass(&d, rate, cfg.band_low_hz, cfg.band_high_hz, cfg.filter_order)?;
    Ok(rectify_envelope(&f, rate, cfg.envelope_window_s))
}

/// Balanced, integrated (but not yet normalized) contraction signal at
/// the raw rate.
pub fn integrated_signal(record: &RawEmgRecord, cfg: &PipelineConfig) -> Result<Vec<f64>> {
    if record.channels.iter().all(|c| c.iter().all(|&v| v == 0.0)) {
        return Err(Error::DegenerateSession);
    }
    let envelopes = [
        channel_envelope(&record.channels[0], record.sample_rate, cfg)?,
        channel_envelope(&record.channels[1], record.sample_rate, cfg)?,
        channel_envelope(&record.channels[2], record.sample_rate, cfg)?,
        channel_envelope(&record.channels[3], record.sample_rate, cfg)?,
    ];
    balance_and_integrate(&envelopes)
}

/// Full pipeline with normalization statistics taken from this record.
pub fn process(record: &RawEmgRecord, cfg: &PipelineConfig) -> Result<MclSequence> {
    let integrated = integrated_signal(record, cfg)?;
    let stats = session_stats(&integrated, cfg.normalization)?;
    normalize_user(&integrated, stats, record.sample_rate, cfg.output_rate_hz)
}

/// Full pipeline with externally supplied per-user statistics (computed
/// over the user's full session rather than this record alone).
pub fn process_with_stats(
    record: &RawEmgRecord,
    cfg: &PipelineConfig,
    stats: UserStats,
) -> Result<MclSequence> {
    let integrated = integrated_signal(record, cfg)?;
    normalize_user(&integrated, stats, record.sample_rate, cfg.output_rate_hz)
}
