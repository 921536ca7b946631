//! NRMSE, NMAE, Pearson and Spearman correlations, and aggregate
//! evaluation reports.
//!
//! NRMSE/NMAE are normalized by the measured signal's range (max - min)
//! and reported in percent; a mean-normalized variant is available for
//! comparison.

use crate::error::{Error, Result};

/// Which denominator normalizes NRMSE/NMAE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorNormalization {
    /// max(measured) - min(measured); the default.
    Range,
    /// mean(measured).
    Mean,
}

fn normalizer(measured: &[f64], norm: ErrorNormalization) -> Result<f64> {
    let d = match norm {
        ErrorNormalization::Range => {
            let min = measured.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = measured.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            max - min
        }
        ErrorNormalization::Mean => measured.iter().sum::<f64>() / measured.len() as f64,
    };
    if !(d > 0.0) {
        return Err(Error::DegenerateRange);
    }
    Ok(d)
}

fn check_lengths(predicted: &[f64], measured: &[f64]) -> Result<()> {
    if predicted.len() != measured.len() || measured.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need equal lengths >= 2, got {} and {}",
            predicted.len(),
            measured.len()
        )));
    }
    Ok(())
}

/// Root-mean-square error over the measured range, in percent.
pub fn nrmse(predicted: &[f64], measured: &[f64]) -> Result<f64> {
    nrmse_with(predicted, measured, ErrorNormalization::Range)
}

pub fn nrmse_with(
    predicted: &[f64],
    measured: &[f64],
    norm: ErrorNormalization,
) -> Result<f64> {
    check_lengths(predicted, measured)?;
    let mse = predicted
        .iter()
        .zip(measured)
        .map(|(p, m)| (p - m) * (p - m))
        .sum::<f64>()
        / measured.len() as f64;
    Ok(100.0 * mse.sqrt() / normalizer(measured, norm)?)
}

/// Mean absolute error over the measured range, in percent.
pub fn nmae(predicted: &[f64], measured: &[f64]) -> Result<f64> {
    nmae_with(predicted, measured, ErrorNormalization::Range)
}

pub fn nmae_with(predicted: &[f64], measured: &[f64], norm: ErrorNormalization) -> Result<f64> {
    check_lengths(predicted, measured)?;
    let mae = predicted
        .iter()
        .zip(measured)
        .map(|(p, m)| (p - m).abs())
        .sum::<f64>()
        / measured.len() as f64;
    Ok(100.0 * mae / normalizer(measured, norm)?)
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Average ranks; ties receive the mean of the ranks they occupy.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            r[k] = mean_rank;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation: Pearson on average-ranked data.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y)?;
    pearson(&ranks(x), &ranks(y))
}

/// Mean and (sample) standard deviation of a set of per-anchor values.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One evaluated anchor.
#[derive(Debug, Clone)]
pub struct AnchorMetrics {
    pub anchor: (f64, f64),
    pub nrmse_pct: f64,
    pub nmae_pct: f64,
    pub pearson: f64,
    pub spearman: f64,
    pub samples: usize,
}

/// Aggregated evaluation results across anchors, plus pooled
/// correlations over all samples.
#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub mode: String,
    pub per_anchor: Vec<AnchorMetrics>,
    pub nrmse_mean: f64,
    pub nrmse_std: f64,
    pub nmae_mean: f64,
    pub nmae_std: f64,
    pub pearson_pooled: f64,
    pub spearman_pooled: f64,
    pub total_samples: usize,
}

impl EvaluationReport {
    /// Build the aggregate from per-anchor rows plus the pooled
    /// predicted/measured sample streams.
    pub fn from_anchors(
        mode: &str,
        per_anchor: Vec<AnchorMetrics>,
        pooled_predicted: &[f64],
        pooled_measured: &[f64],
    ) -> Result<Self> {
        if per_anchor.is_empty() {
            return Err(Error::InvalidInput("no anchors evaluated".into()));
        }
        let nr: Vec<f64> = per_anchor.iter().map(|a| a.nrmse_pct).collect();
        let nm: Vec<f64> = per_anchor.iter().map(|a| a.nmae_pct).collect();
        let (nrmse_mean, nrmse_std) = mean_std(&nr);
        let (nmae_mean, nmae_std) = mean_std(&nm);
        Ok(EvaluationReport {
            mode: mode.to_string(),
            per_anchor,
            nrmse_mean,
            nrmse_std,
            nmae_mean,
            nmae_std,
            pearson_pooled: pearson(pooled_predicted, pooled_measured)?,
            spearman_pooled: spearman(pooled_predicted, pooled_measured)?,
            total_samples: pooled_measured.len(),
        })
    }

    /// Human-readable summary.
    pub fn text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("evaluation mode: {}\n", self.mode));
        s.push_str(&format!(
            "anchors: {}  samples: {}\n",
            self.per_anchor.len(),
            self.total_samples
        ));
        s.push_str(&format!(
            "NRMSE: {:.2} +/- {:.2} %\n",
            self.nrmse_mean, self.nrmse_std
        ));
        s.push_str(&format!(
            "NMAE:  {:.2} +/- {:.2} %\n",
            self.nmae_mean, self.nmae_std
        ));
        s.push_str(&format!("Pearson (pooled):  {:.4}\n", self.pearson_pooled));
        s.push_str(&format!("Spearman (pooled): {:.4}\n", self.spearman_pooled));
        for a in &self.per_anchor {
            s.push_str(&format!(
                "anchor ({:+05.1},{:+05.1})  NRMSE {:6.2}%  NMAE {:6.2}%  r {:+.3}  rho {:+.3}  n {}\n",
                a.anchor.0, a.anchor.1, a.nrmse_pct, a.nmae_pct, a.pearson, a.spearman, a.samples
            ));
        }
        s
    }

    /// Plot-data CSV rows: `anchor,metric,value`.
    pub fn plot_csv(&self) -> String {
        let mut s = String::from("anchor,metric,value\n");
        for a in &self.per_anchor {
            let tag = format!("({},{})", a.anchor.0, a.anchor.1);
            s.push_str(&format!("{tag},nrmse_pct,{}\n", a.nrmse_pct));
            s.push_str(&format!("{tag},nmae_pct,{}\n", a.nmae_pct));
            s.push_str(&format!("{tag},pearson,{}\n", a.pearson));
            s.push_str(&format!("{tag},spearman,{}\n", a.spearman));
        }
        s
    }
}
