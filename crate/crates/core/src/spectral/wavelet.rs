use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{Method, Spectrogram};
use crate::error::{ensure_finite, Error, Result};

/// Finer scales would sample the wavelet's oscillation too coarsely.
pub const MIN_SAMPLES_PER_OSCILLATION: f64 = 8.0;

/// Half-width of the sampled wavelet in units of the scale.
const SUPPORT: f64 = 5.0;

/// Morlet mother wavelet and the scale grid (scales in seconds, ascending).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletConfig {
    /// Center angular frequency ω0 of `ψ(t) = π^(-1/4) e^{iω0 t} e^{-t²/2}`.
    pub omega0: f64,
    pub scales: Vec<f64>,
}

impl Default for WaveletConfig {
    /// ω0 = 6 with 64 log-spaced scales covering 1–25 Hz.
    fn default() -> Self {
        Self::log_band(1.0, 25.0, 64)
    }
}

impl WaveletConfig {
    pub const OMEGA0: f64 = 6.0;

    /// `count` scales whose center frequencies are log-spaced over `[lo, hi]` Hz.
    pub fn log_band(lo: f64, hi: f64, count: usize) -> Self {
        let count = count.max(1);
        let step = if count > 1 {
            (hi / lo).ln() / (count - 1) as f64
        } else {
            0.0
        };
        let mut scales: Vec<f64> = (0..count)
            .map(|k| Self::OMEGA0 / (2.0 * PI * lo * (step * k as f64).exp()))
            .collect();
        scales.reverse();
        WaveletConfig {
            omega0: Self::OMEGA0,
            scales,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::invalid("Morlet center frequency must be positive"));
        }
        if self.scales.is_empty() {
            return Err(Error::invalid("scale grid is empty"));
        }
        if self.scales.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::invalid("scales must be strictly positive"));
        }
        if !self.scales.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("scales must be sorted strictly ascending"));
        }
        Ok(())
    }

    /// Center frequency (Hz) of scale `a`.
    pub fn frequency(&self, a: f64) -> f64 {
        self.omega0 / (2.0 * PI * a)
    }

    fn check_sampling(&self, sample_rate: f64) -> Result<()> {
        let finest = self.scales[0];
        let per_osc = sample_rate / self.frequency(finest);
        if per_osc < MIN_SAMPLES_PER_OSCILLATION - 1e-9 {
            return Err(Error::invalid(format!(
                "scale {finest} s gives {per_osc:.2} samples per oscillation (< {MIN_SAMPLES_PER_OSCILLATION})"
            )));
        }
        Ok(())
    }
}

/// Complex CWT coefficients, one row per scale in ascending frequency.
#[derive(Debug, Clone)]
pub struct CwtCoefficients {
    pub rows: Vec<Vec<Complex64>>,
    pub freqs: Vec<f64>,
    pub scales: Vec<f64>,
    pub sample_rate: f64,
}

impl CwtCoefficients {
    pub fn times(&self) -> Vec<f64> {
        let n = self.rows.first().map_or(0, Vec::len);
        (0..n).map(|i| i as f64 / self.sample_rate).collect()
    }

    pub fn power(&self) -> Spectrogram {
        let power = self.rows.iter().flat_map(|r| r.iter().map(|c| c.norm_sqr())).collect();
        Spectrogram {
            power,
            freqs: self.freqs.clone(),
            times: self.times(),
            method: Method::Cwt,
        }
    }
}

/// `W(a, b) = Σ x(t) a^{-1/2} ψ*((t - b)/a) Δt` at every sample `b`, evaluated
/// as a zero-padded linear correlation through the FFT.
pub fn cwt_coefficients(x: &[f64], sample_rate: f64, cfg: &WaveletConfig) -> Result<CwtCoefficients> {
    cfg.validate()?;
    ensure_finite(x)?;
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(Error::invalid("sample rate must be positive"));
    }
    cfg.check_sampling(sample_rate)?;
    if x.is_empty() {
        return Err(Error::invalid("empty signal"));
    }

    let n = x.len();
    let dt = 1.0 / sample_rate;
    let reach = |a: f64| (SUPPORT * a * sample_rate).ceil() as usize;
    let widest = reach(*cfg.scales.last().unwrap());
    let m = (n + widest + 1).next_power_of_two();

    let mut planner = FftPlanner::<f64>::new();
    let forward: Arc<dyn Fft<f64>> = planner.plan_fft_forward(m);
    let inverse: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(m);

    let mut spectrum: Vec<Complex64> = x.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    spectrum.resize(m, Complex64::new(0.0, 0.0));
    forward.process(&mut spectrum);

    let norm = PI.powf(-0.25);
    let omega0 = cfg.omega0;
    // Descending scale = ascending frequency.
    let order: Vec<f64> = cfg.scales.iter().rev().copied().collect();
    let rows: Vec<Vec<Complex64>> = order
        .par_iter()
        .map(|&a| {
            let u = reach(a);
            let gain = norm * dt / a.sqrt();
            let mut kernel = vec![Complex64::new(0.0, 0.0); m];
            // W[b] = Σ_j x[b - j] h[j] with h[j] = conj ψ(-j Δt / a)
            for j in -(u as i64)..=(u as i64) {
                let s = -(j as f64) * dt / a;
                let psi = Complex64::from_polar(gain * (-0.5 * s * s).exp(), omega0 * s);
                kernel[j.rem_euclid(m as i64) as usize] = psi.conj();
            }
            forward.process(&mut kernel);
            for (k, s) in kernel.iter_mut().zip(&spectrum) {
                *k *= s;
            }
            inverse.process(&mut kernel);
            let scale = 1.0 / m as f64;
            kernel.truncate(n);
            kernel.iter_mut().for_each(|c| *c *= scale);
            kernel
        })
        .collect();

    Ok(CwtCoefficients {
        freqs: order.iter().map(|a| cfg.frequency(*a)).collect(),
        scales: order,
        rows,
        sample_rate,
    })
}

/// Scalogram `|W(a, b)|²` with rows in ascending frequency.
pub fn cwt(x: &[f64], sample_rate: f64, cfg: &WaveletConfig) -> Result<Spectrogram> {
    Ok(cwt_coefficients(x, sample_rate, cfg)?.power())
}
