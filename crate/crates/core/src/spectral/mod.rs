//! Time-frequency representations: STFT, Morlet CWT and the synchrosqueezed
//! wavelet transform, plus the power-spectrogram entropy used to rank them.

mod sst;
mod stft;
mod wavelet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use sst::{sst, sst_detailed, SstOutput, SST_FLOOR};
pub use stft::{stft, StftConfig, Window};
pub use wavelet::{cwt, cwt_coefficients, CwtCoefficients, WaveletConfig, MIN_SAMPLES_PER_OSCILLATION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Stft,
    Cwt,
    Sst,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Stft => "stft",
            Method::Cwt => "cwt",
            Method::Sst => "sst",
        })
    }
}

/// Nonnegative F×T power matrix, stored row-major (one row per frequency).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub power: Vec<f64>,
    pub freqs: Vec<f64>,
    pub times: Vec<f64>,
    pub method: Method,
}

fn strictly_ascending(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

impl Spectrogram {
    pub fn new(power: Vec<f64>, freqs: Vec<f64>, times: Vec<f64>, method: Method) -> Result<Self> {
        if power.len() != freqs.len() * times.len() {
            return Err(Error::invalid(format!(
                "power has {} cells, expected {}x{}",
                power.len(),
                freqs.len(),
                times.len()
            )));
        }
        if !strictly_ascending(&freqs) || !strictly_ascending(&times) {
            return Err(Error::invalid("spectrogram axes must be strictly ascending"));
        }
        if let Some(i) = power.iter().position(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::invalid(format!("negative or non-finite power at cell {i}")));
        }
        Ok(Spectrogram {
            power,
            freqs,
            times,
            method,
        })
    }

    pub fn rows(&self) -> usize {
        self.freqs.len()
    }

    pub fn cols(&self) -> usize {
        self.times.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.power[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let t = self.cols();
        &self.power[row * t..(row + 1) * t]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows()).map(|r| self.get(r, col)).collect()
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Row index with the largest power in column `col` (first on ties).
    pub fn column_argmax(&self, col: usize) -> usize {
        let mut best = 0;
        for r in 1..self.rows() {
            if self.get(r, col) > self.get(best, col) {
                best = r;
            }
        }
        best
    }

    /// Keep only rows with `lo <= freq <= hi`.
    pub fn crop_band(&self, lo: f64, hi: f64) -> Result<Spectrogram> {
        let keep: Vec<usize> = (0..self.rows())
            .filter(|&r| self.freqs[r] >= lo && self.freqs[r] <= hi)
            .collect();
        if keep.is_empty() {
            return Err(Error::invalid(format!("no frequency rows inside [{lo}, {hi}] Hz")));
        }
        let mut power = Vec::with_capacity(keep.len() * self.cols());
        for &r in &keep {
            power.extend_from_slice(self.row(r));
        }
        Ok(Spectrogram {
            power,
            freqs: keep.iter().map(|&r| self.freqs[r]).collect(),
            times: self.times.clone(),
            method: self.method,
        })
    }
}

/// Power-spectrogram entropy: Shannon entropy of the power distribution over
/// all F·T cells, normalized by `ln(F·T)`. Small values mean concentrated
/// energy.
pub fn pse(s: &Spectrogram) -> Result<f64> {
    let total = s.total_power();
    if !(total > 0.0) {
        return Err(Error::invalid("entropy undefined for an all-zero spectrogram"));
    }
    let cells = s.power.len();
    if cells < 2 {
        return Ok(0.0);
    }
    let h: f64 = s
        .power
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| {
            let q = p / total;
            -q * q.ln()
        })
        .sum();
    Ok((h / (cells as f64).ln()).clamp(0.0, 1.0))
}
