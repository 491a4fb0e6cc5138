use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{Method, Spectrogram};
use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    fn taper(&self, len: usize) -> Vec<f64> {
        match self {
            // periodic Hann
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; len],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftConfig {
    pub window_length: usize,
    pub hop: usize,
    pub window: Window,
}

impl Default for StftConfig {
    /// Hann taper with 75 % overlap.
    fn default() -> Self {
        StftConfig {
            window_length: 256,
            hop: 64,
            window: Window::Hann,
        }
    }
}

/// Squared magnitude of the windowed DFT on frames `[k·hop, k·hop + L)`.
///
/// Rows are the one-sided bins `k·fs/L`, `k = 0..=L/2`; each column is
/// stamped with its frame center.
pub fn stft(x: &[f64], sample_rate: f64, cfg: &StftConfig) -> Result<Spectrogram> {
    ensure_finite(x)?;
    let len = cfg.window_length;
    if len < 2 {
        return Err(Error::invalid("STFT window must hold at least 2 samples"));
    }
    if len > x.len() {
        return Err(Error::invalid(format!(
            "STFT window ({len}) longer than signal ({})",
            x.len()
        )));
    }
    if cfg.hop == 0 {
        return Err(Error::invalid("STFT hop must be at least 1"));
    }
    if !(sample_rate > 0.0) {
        return Err(Error::invalid("sample rate must be positive"));
    }

    let taper = cfg.window.taper(len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let bins = len / 2 + 1;
    let frames = (x.len() - len) / cfg.hop + 1;
    let mut columns = Vec::with_capacity(frames);
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for k in 0..frames {
        let start = k * cfg.hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = Complex64::new(x[start + i] * taper[i], 0.0);
        }
        fft.process(&mut buf);
        columns.push(buf[..bins].iter().map(|c| c.norm_sqr()).collect::<Vec<f64>>());
    }

    let mut power = vec![0.0; bins * frames];
    for (j, col) in columns.iter().enumerate() {
        for (i, p) in col.iter().enumerate() {
            power[i * frames + j] = *p;
        }
    }
    let freqs = (0..bins).map(|k| k as f64 * sample_rate / len as f64).collect();
    let times = (0..frames)
        .map(|k| (k * cfg.hop) as f64 / sample_rate + len as f64 / (2.0 * sample_rate))
        .collect();
    Spectrogram::new(power, freqs, times, Method::Stft)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(f: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect()
    }

    #[test]
    fn tone_ridge_within_one_bin() {
        let fs = 200.0;
        let s = stft(&tone(5.0, fs, 2000), fs, &StftConfig::default()).unwrap();
        let bin = fs / 256.0;
        for j in 0..s.cols() {
            let f = s.freqs[s.column_argmax(j)];
            assert!((f - 5.0).abs() <= bin, "column {j}: {f}");
        }
    }

    #[test]
    fn zero_signal_has_zero_power() {
        let s = stft(&[0.0; 512], 200.0, &StftConfig::default()).unwrap();
        assert!(s.power.iter().all(|p| *p == 0.0));
    }

    #[test]
    fn ridge_follows_tone_switch() {
        let fs = 200.0;
        let mut x = tone(5.0, fs, 2000);
        x.extend(tone(10.0, fs, 2000));
        let cfg = StftConfig::default();
        let s = stft(&x, fs, &cfg).unwrap();
        let bin = fs / 256.0;
        let win = cfg.window_length as f64 / fs;
        for j in 0..s.cols() {
            let t = s.times[j];
            let f = s.freqs[s.column_argmax(j)];
            if t + win / 2.0 < 10.0 {
                assert!((f - 5.0).abs() <= bin);
            } else if t - win / 2.0 >= 10.0 {
                assert!((f - 10.0).abs() <= bin);
            }
        }
    }

    #[test]
    fn rejects_long_window_and_zero_hop() {
        assert!(stft(&[0.0; 100], 200.0, &StftConfig::default()).is_err());
        let cfg = StftConfig {
            hop: 0,
            ..Default::default()
        };
        assert!(stft(&[0.0; 1000], 200.0, &cfg).is_err());
    }
}
