use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use super::wavelet::{cwt_coefficients, WaveletConfig};
use super::{Method, Spectrogram};
use crate::error::{Error, Result};

/// Coefficients with `|W| < SST_FLOOR · max|W|` are treated as `W = 0`.
pub const SST_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SstOutput {
    pub spectrogram: Spectrogram,
    /// CWT power of the coefficients that were reassigned.
    pub included_power: f64,
    /// CWT power over every coefficient.
    pub cwt_power: f64,
}

/// Phase increment between two samples, as an instantaneous frequency in Hz.
fn phase_rate(later: Complex64, earlier: Complex64, span: f64) -> f64 {
    (later * earlier.conj()).arg() / (2.0 * PI * span)
}

/// Synchrosqueezed wavelet transform.
///
/// Each CWT coefficient's energy `|W(a, b)|²` moves to the bin nearest its
/// instantaneous frequency, estimated from the phase advance of `W` along `b`
/// (central difference inside, one-sided at the two ends). Bins are
/// log-spaced over the frequency span of the scale grid.
pub fn sst_detailed(x: &[f64], sample_rate: f64, cfg: &WaveletConfig, freq_bins: usize) -> Result<SstOutput> {
    if freq_bins < 8 {
        return Err(Error::invalid(format!("need at least 8 frequency bins, got {freq_bins}")));
    }
    let w = cwt_coefficients(x, sample_rate, cfg)?;
    let n = x.len();
    let dt = 1.0 / sample_rate;

    let lo = w.freqs[0];
    let hi = *w.freqs.last().unwrap();
    let (log_lo, step) = if hi > lo {
        (lo.ln(), (hi / lo).ln() / (freq_bins - 1) as f64)
    } else {
        (lo.ln(), 1.0)
    };
    let centers: Vec<f64> = (0..freq_bins).map(|k| (log_lo + step * k as f64).exp()).collect();

    let peak = w
        .rows
        .iter()
        .flat_map(|r| r.iter().map(|c| c.norm()))
        .fold(0.0f64, f64::max);
    let floor = SST_FLOOR * peak;

    let inst_freq = |row: &[Complex64], b: usize| -> f64 {
        if n == 1 {
            return 0.0;
        }
        if b == 0 {
            phase_rate(row[1], row[0], dt)
        } else if b == n - 1 {
            phase_rate(row[n - 1], row[n - 2], dt)
        } else {
            phase_rate(row[b + 1], row[b - 1], 2.0 * dt)
        }
    };

    // Each column is reassigned independently, rows visited in a fixed order.
    let columns: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|b| {
            let mut col = vec![0.0; freq_bins];
            let mut included = 0.0;
            if peak == 0.0 {
                return (col, included);
            }
            for row in &w.rows {
                let c = row[b];
                if c.norm() < floor {
                    continue;
                }
                let f = inst_freq(row, b);
                if !(f > 0.0) {
                    continue;
                }
                let k = ((f.ln() - log_lo) / step).round();
                if k < 0.0 || k >= freq_bins as f64 {
                    continue;
                }
                let e = c.norm_sqr();
                col[k as usize] += e;
                included += e;
            }
            (col, included)
        })
        .collect();

    let mut power = vec![0.0; freq_bins * n];
    let mut included_power = 0.0;
    for (b, (col, inc)) in columns.iter().enumerate() {
        for (k, p) in col.iter().enumerate() {
            power[k * n + b] = *p;
        }
        included_power += inc;
    }
    let cwt_power = w.rows.iter().flat_map(|r| r.iter().map(|c| c.norm_sqr())).sum();

    Ok(SstOutput {
        spectrogram: Spectrogram {
            power,
            freqs: centers,
            times: w.times(),
            method: Method::Sst,
        },
        included_power,
        cwt_power,
    })
}

pub fn sst(x: &[f64], sample_rate: f64, cfg: &WaveletConfig, freq_bins: usize) -> Result<Spectrogram> {
    Ok(sst_detailed(x, sample_rate, cfg, freq_bins)?.spectrogram)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::cwt;

    fn tone(f: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).cos()).collect()
    }

    /// Energy-weighted standard deviation of log-frequency in one column.
    fn spread(s: &Spectrogram, col: usize) -> f64 {
        let w = s.column(col);
        let total: f64 = w.iter().sum();
        let mean: f64 = w.iter().zip(&s.freqs).map(|(p, f)| p * f.ln()).sum::<f64>() / total;
        let var: f64 = w
            .iter()
            .zip(&s.freqs)
            .map(|(p, f)| p * (f.ln() - mean).powi(2))
            .sum::<f64>()
            / total;
        var.sqrt()
    }

    #[test]
    fn tone_is_sharper_than_cwt() {
        let fs = 200.0;
        let cfg = WaveletConfig::default();
        let x = tone(8.0, fs, 3000);
        let c = cwt(&x, fs, &cfg).unwrap();
        let s = sst(&x, fs, &cfg, 64).unwrap();
        for j in (800..2200).step_by(50) {
            assert!(spread(&s, j) < spread(&c, j), "column {j}");
        }
    }

    #[test]
    fn zero_signal_gives_zero_power() {
        let s = sst(&[0.0; 512], 200.0, &WaveletConfig::default(), 64).unwrap();
        assert!(s.power.iter().all(|p| *p == 0.0));
    }

    #[test]
    fn energy_is_moved_not_created() {
        let fs = 200.0;
        let x: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 113) as f64 / 113.0 - 0.5).collect();
        let out = sst_detailed(&x, fs, &WaveletConfig::default(), 64).unwrap();
        let total = out.spectrogram.total_power();
        assert!((total - out.included_power).abs() <= 1e-9 * out.included_power);
        assert!(out.included_power <= out.cwt_power * (1.0 + 1e-12));
    }

    #[test]
    fn rejects_too_few_bins() {
        assert!(sst(&[0.0; 64], 200.0, &WaveletConfig::default(), 7).is_err());
    }
}
