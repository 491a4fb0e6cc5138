//! Single-channel ECG traces and the interpolation helpers shared by the
//! ODE generator, the pipeline and the metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Characteristic ECG waves, in their order within a beat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Wave {
    P,
    Q,
    R,
    S,
    T,
}

impl Wave {
    pub const ALL: [Wave; 5] = [Wave::P, Wave::Q, Wave::R, Wave::S, Wave::T];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Wave {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EcgTrace {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    /// Annotated peak sample indices, strictly increasing per wave.
    pub peaks: BTreeMap<Wave, Vec<usize>>,
}

impl EcgTrace {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::invalid(format!("sample rate must be positive, got {sample_rate}")));
        }
        Ok(EcgTrace {
            samples,
            sample_rate,
            peaks: BTreeMap::new(),
        })
    }

    pub fn with_peaks(mut self, wave: Wave, indices: Vec<usize>) -> Result<Self> {
        if !indices.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid(format!("{wave} annotations must be strictly increasing")));
        }
        if indices.last().is_some_and(|&i| i >= self.samples.len()) {
            return Err(Error::invalid(format!("{wave} annotation outside the trace")));
        }
        self.peaks.insert(wave, indices);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn peak_indices(&self, wave: Wave) -> &[usize] {
        self.peaks.get(&wave).map_or(&[], Vec::as_slice)
    }

    pub fn peak_times(&self, wave: Wave) -> Vec<f64> {
        self.peak_indices(wave)
            .iter()
            .map(|&i| i as f64 / self.sample_rate)
            .collect()
    }

    /// Linear resampling to `rate`; annotations are mapped to the nearest sample.
    pub fn resampled(&self, rate: f64) -> Result<EcgTrace> {
        if rate == self.sample_rate {
            return Ok(self.clone());
        }
        let n = (self.duration() * rate).round() as usize;
        let samples = resample_linear(&self.samples, n);
        let mut out = EcgTrace::new(samples, rate)?;
        for (wave, idx) in &self.peaks {
            let mut mapped: Vec<usize> = idx
                .iter()
                .map(|&i| ((i as f64 * rate / self.sample_rate).round() as usize).min(n.saturating_sub(1)))
                .collect();
            mapped.dedup();
            out.peaks.insert(*wave, mapped);
        }
        Ok(out)
    }
}

/// Value at fractional index `pos` of a periodic sequence.
pub fn interp_circular(x: &[f64], pos: f64) -> f64 {
    let n = x.len();
    let p = pos.rem_euclid(n as f64);
    let i = p.floor() as usize % n;
    let frac = p - p.floor();
    let j = (i + 1) % n;
    if frac == 0.0 {
        x[i]
    } else {
        x[i] + (x[j] - x[i]) * frac
    }
}

/// Linear resampling of `x` onto `len` points spanning the same interval,
/// endpoints included.
pub fn resample_linear(x: &[f64], len: usize) -> Vec<f64> {
    match (x.len(), len) {
        (_, 0) => Vec::new(),
        (0, _) => vec![0.0; len],
        (1, _) => vec![x[0]; len],
        (_, 1) => vec![x[0]],
        (n, m) => (0..m)
            .map(|k| {
                let pos = k as f64 * (n - 1) as f64 / (m - 1) as f64;
                let i = (pos.floor() as usize).min(n - 2);
                let frac = pos - i as f64;
                x[i] + (x[i + 1] - x[i]) * frac
            })
            .collect(),
    }
}

/// Linear resampling of a period sampled on `[0, T)` to `len` points on
/// `[0, T)`.
pub fn resample_periodic(x: &[f64], len: usize) -> Vec<f64> {
    if x.is_empty() {
        return vec![0.0; len];
    }
    let ratio = x.len() as f64 / len as f64;
    (0..len).map(|k| interp_circular(x, k as f64 * ratio)).collect()
}

/// Affine map onto `[0, 1]`; a flat input maps to all zeros.
pub fn min_max_normalize(x: &[f64]) -> Vec<f64> {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 1e-12 * hi.abs().max(lo.abs()).max(1e-300)) {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - lo) / range).collect()
}
