//! Signal-processing primitives: Butterworth band-pass design as
//! second-order sections, zero-phase (forward-backward) filtering, and
//! moving-window statistics.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// One biquad, direct form II transposed. `b` numerator, `a` denominator
/// with `a[0] == 1`.
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    /// Filter a signal in place (single forward pass).
    pub fn run(&self, x: &mut [f64]) {
        let (b0, b1, b2) = (self.b[0], self.b[1], self.b[2]);
        let (a1, a2) = (self.a[1], self.a[2]);
        let mut z1 = 0.0;
        let mut z2 = 0.0;
        for v in x.iter_mut() {
            let xin = *v;
            let y = b0 * xin + z1;
            z1 = b1 * xin - a1 * y + z2;
            z2 = b2 * xin - a2 * y;
            *v = y;
        }
    }

    /// Complex frequency response at normalized angular frequency `w`
    /// (radians/sample).
    pub fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = self.b[0] + self.b[1] * z1 + self.b[2] * z2;
        let den = 1.0 + self.a[1] * z1 + self.a[2] * z2;
        num / den
    }
}

/// A cascade of second-order sections.
#[derive(Debug, Clone)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
    pub sample_rate: f64,
    /// Low band edge, used to size the filtfilt edge padding.
    low_hz: f64,
}

impl SosFilter {
    /// Butterworth band-pass of the given total order (order/2 pole pairs;
    /// order must be even) between `low` and `high` Hz.
    pub fn butterworth_bandpass(
        order: usize,
        low: f64,
        high: f64,
        sample_rate: f64,
    ) -> Result<Self> {
        if order == 0 || !order.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "band-pass order must be even and positive, got {order}"
            )));
        }
        if !(low > 0.0 && low < high && high < sample_rate / 2.0) {
            return Err(Error::InvalidInput(format!(
                "cutoffs must satisfy 0 < low < high < rate/2, got {low}/{high} at {sample_rate} Hz"
            )));
        }
        let n = order / 2; // lowpass prototype order
        let fs2 = 2.0 * sample_rate;
        // Prewarped analog band edges.
        let wl = fs2 * (std::f64::consts::PI * low / sample_rate).tan();
        let wh = fs2 * (std::f64::consts::PI * high / sample_rate).tan();
        let bw = wh - wl;
        let w0sq = wl * wh;

        // Butterworth lowpass prototype poles on the unit circle.
        let mut analog_poles = Vec::with_capacity(order);
        for k in 0..n {
            let theta =
                std::f64::consts::PI * (2.0 * k as f64 + n as f64 + 1.0) / (2.0 * n as f64);
            let p = Complex64::from_polar(1.0, theta);
            // Lowpass-to-bandpass: s^2 - p*bw*s + w0^2 = 0.
            let pb = p * bw;
            let disc = (pb * pb - 4.0 * w0sq).sqrt();
            analog_poles.push((pb + disc) / 2.0);
            analog_poles.push((pb - disc) / 2.0);
        }

        // Bilinear transform; N zeros at z=1 (from s=0) and N at z=-1.
        let digital_poles: Vec<Complex64> = analog_poles
            .iter()
            .map(|&s| (fs2 + s) / (fs2 - s))
            .collect();

        // Group conjugate poles into biquads with a (1, 0, -1) numerator.
        let mut used = vec![false; digital_poles.len()];
        let mut sections = Vec::with_capacity(n);
        for i in 0..digital_poles.len() {
            if used[i] {
                continue;
            }
            used[i] = true;
            let p = digital_poles[i];
            // Find the closest conjugate partner.
            let mut best = None;
            let mut best_d = f64::INFINITY;
            for (j, q) in digital_poles.iter().enumerate() {
                if used[j] {
                    continue;
                }
                let d = (q - p.conj()).norm();
                if d < best_d {
                    best_d = d;
                    best = Some(j);
                }
            }
            let j = best.expect("odd pole count");
            used[j] = true;
            let q = digital_poles[j];
            sections.push(Biquad {
                b: [1.0, 0.0, -1.0],
                a: [1.0, -(p + q).re, (p * q).re],
            });
        }

        // Normalize to unit gain at the geometric band center.
        let fc = (low * high).sqrt();
        let wc = 2.0 * std::f64::consts::PI * fc / sample_rate;
        let mut mag = 1.0;
        for s in &sections {
            mag *= s.response(wc).norm();
        }
        let g = 1.0 / mag;
        sections[0].b = [g, 0.0, -g];

        Ok(SosFilter {
            sections,
            sample_rate,
            low_hz: low,
        })
    }

    /// Magnitude response at `freq` Hz for a single forward pass.
    pub fn magnitude(&self, freq: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq / self.sample_rate;
        self.sections
            .iter()
            .map(|s| s.response(w).norm())
            .product()
    }

    /// Single forward pass through the cascade.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            s.run(&mut y);
        }
        y
    }

    /// Zero-phase forward-backward filtering with odd-extension edge
    /// padding sized by the low band edge.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        if x.is_empty() {
            return Vec::new();
        }
        let pad = ((6.0 * self.sample_rate / self.low_hz) as usize).min(x.len() - 1);
        let n = x.len();
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for k in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[k]);
        }
        ext.extend_from_slice(x);
        for k in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - k]);
        }
        let mut y = self.filter(&ext);
        y.reverse();
        let mut y = self.filter(&y);
        y.reverse();
        y[pad..pad + n].to_vec()
    }
}

/// Centered moving mean with edge truncation; window in samples.
pub fn moving_mean(x: &[f64], window: usize) -> Vec<f64> {
    moving_stat(x, window, false)
}

/// Centered moving RMS with edge truncation; window in samples.
pub fn moving_rms(x: &[f64], window: usize) -> Vec<f64> {
    moving_stat(x, window, true)
}

fn moving_stat(x: &[f64], window: usize, rms: bool) -> Vec<f64> {
    let n = x.len();
    let w = window.max(1);
    let half = w / 2;
    // Prefix sums of x or x^2.
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in x {
        acc += if rms { v * v } else { v };
        prefix.push(acc);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + w - half).min(n);
            let m = (prefix[hi] - prefix[lo]) / (hi - lo) as f64;
            if rms {
                m.max(0.0).sqrt()
            } else {
                m
            }
        })
        .collect()
}

/// Block-average downsampling by an integer factor; a trailing partial
/// block is averaged over its actual length.
pub fn block_average(x: &[f64], factor: usize) -> Vec<f64> {
    assert!(factor >= 1);
    x.chunks(factor)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

/// Linear-interpolation upsampling by an integer factor (endpoint held).
pub fn upsample_linear(x: &[f64], factor: usize) -> Vec<f64> {
    assert!(factor >= 1);
    if x.len() < 2 {
        return vec![x.first().copied().unwrap_or(0.0); x.len() * factor];
    }
    let n_out = x.len() * factor;
    (0..n_out)
        .map(|k| {
            let pos = k as f64 / factor as f64;
            let i = (pos.floor() as usize).min(x.len() - 2);
            let frac = pos - i as f64;
            x[i] + frac * (x[i + 1] - x[i])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, rate: f64, secs: f64) -> Vec<f64> {
        let n = (rate * secs) as usize;
        (0..n)
            .map(|k| (2.0 * std::f64::consts::PI * freq * k as f64 / rate).sin())
            .collect()
    }

    fn steady_amplitude(y: &[f64]) -> f64 {
        // RMS over the central half, times sqrt(2).
        let n = y.len();
        let mid = &y[n / 4..3 * n / 4];
        let rms = (mid.iter().map(|v| v * v).sum::<f64>() / mid.len() as f64).sqrt();
        rms * std::f64::consts::SQRT_2
    }

    #[test]
    fn bandpass_passes_midband() {
        let f = SosFilter::butterworth_bandpass(4, 20.0, 450.0, 2000.0).unwrap();
        let y = f.filtfilt(&sine(100.0, 2000.0, 2.0));
        assert!(steady_amplitude(&y) >= 0.99, "{}", steady_amplitude(&y));
    }

    #[test]
    fn bandpass_rejects_low_frequency() {
        let f = SosFilter::butterworth_bandpass(4, 20.0, 450.0, 2000.0).unwrap();
        let y = f.filtfilt(&sine(2.0, 2000.0, 4.0));
        assert!(steady_amplitude(&y) <= 0.05, "{}", steady_amplitude(&y));
    }

    #[test]
    fn bandpass_zero_in_zero_out() {
        let f = SosFilter::butterworth_bandpass(4, 20.0, 450.0, 2000.0).unwrap();
        let y = f.filtfilt(&vec![0.0; 1000]);
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn magnitude_matches_measured_response() {
        let f = SosFilter::butterworth_bandpass(4, 20.0, 450.0, 2000.0).unwrap();
        for freq in [30.0, 100.0, 300.0] {
            let y = f.filter(&sine(freq, 2000.0, 4.0));
            let measured = steady_amplitude(&y);
            assert!(
                (measured - f.magnitude(freq)).abs() < 0.01,
                "{freq} Hz: {measured} vs {}",
                f.magnitude(freq)
            );
        }
    }

    #[test]
    fn invalid_cutoffs_rejected() {
        assert!(SosFilter::butterworth_bandpass(4, 450.0, 20.0, 2000.0).is_err());
        assert!(SosFilter::butterworth_bandpass(4, 20.0, 1100.0, 2000.0).is_err());
        assert!(SosFilter::butterworth_bandpass(3, 20.0, 450.0, 2000.0).is_err());
    }

    #[test]
    fn moving_mean_of_constant() {
        let y = moving_mean(&[5.0; 100], 11);
        assert!(y.iter().all(|&v| (v - 5.0).abs() < 1e-12));
    }

    #[test]
    fn moving_rms_of_sine() {
        let y = moving_rms(&sine(100.0, 2000.0, 1.0), 200);
        let mid = y[y.len() / 2];
        assert!((mid - 1.0 / std::f64::consts::SQRT_2).abs() < 0.01, "{mid}");
    }

    #[test]
    fn block_average_downsample() {
        let x: Vec<f64> = (0..10).map(|k| k as f64).collect();
        assert_eq!(block_average(&x, 2), vec![0.5, 2.5, 4.5, 6.5, 8.5]);
    }
}
