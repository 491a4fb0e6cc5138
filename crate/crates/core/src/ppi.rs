//! Beat-interval estimation from multi-channel energy plots.
//!
//! Every channel's energy plot is cut into overlapping segments. Within a
//! segment, peaks are detected per channel and their successive differences
//! pooled into a candidate set; the segment's PPI is the mode of a Gaussian
//! kernel density estimate over that set. Wrong detections in a minority of
//! channels shift the mode far less than they shift the mean.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::peaks::{find_peaks, PeakFilter};
use crate::signal_model::{PPI_MAX, PPI_MIN};
use crate::spectral::Spectrogram;

/// Spectrogram power summed along frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyPlot {
    pub values: Vec<f64>,
    pub times: Vec<f64>,
    pub channel_id: usize,
}

impl EnergyPlot {
    pub fn new(values: Vec<f64>, times: Vec<f64>, channel_id: usize) -> Result<Self> {
        if values.len() != times.len() {
            return Err(Error::invalid("energy plot values and times differ in length"));
        }
        if let Some(i) = values.iter().position(|v| !(*v >= 0.0)) {
            return Err(Error::invalid(format!("negative energy at sample {i}")));
        }
        Ok(EnergyPlot {
            values,
            times,
            channel_id,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sample spacing in seconds.
    pub fn step(&self) -> Option<f64> {
        (self.times.len() >= 2).then(|| self.times[1] - self.times[0])
    }

    /// Samples `[start, start + len)`, clipped to the plot.
    pub fn slice(&self, start: usize, len: usize) -> EnergyPlot {
        let lo = start.min(self.len());
        let hi = (start + len).min(self.len());
        EnergyPlot {
            values: self.values[lo..hi].to_vec(),
            times: self.times[lo..hi].to_vec(),
            channel_id: self.channel_id,
        }
    }
}

pub fn energy_plot(s: &Spectrogram, channel_id: usize) -> EnergyPlot {
    let mut values = vec![0.0; s.cols()];
    for r in 0..s.rows() {
        for (v, p) in values.iter_mut().zip(s.row(r)) {
            *v += p;
        }
    }
    EnergyPlot {
        values,
        times: s.times.clone(),
        channel_id,
    }
}

/// Kernel bandwidth rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum Bandwidth {
    /// `h = n^(-1/5)`, applied to second-valued data as is.
    Verbatim,
    /// Silverman's rule, `0.9 · min(σ, IQR/1.34) · n^(-1/5)`.
    Silverman,
    Fixed(f64),
}

impl Bandwidth {
    pub fn resolve(&self, candidates: &[f64]) -> f64 {
        let n = candidates.len() as f64;
        let verbatim = n.powf(-0.2);
        match *self {
            Bandwidth::Verbatim => verbatim,
            Bandwidth::Fixed(h) => h,
            Bandwidth::Silverman => {
                let mean = candidates.iter().sum::<f64>() / n;
                let var = candidates.iter().map(|c| (c - mean).powi(2)).sum::<f64>()
                    / (n - 1.0).max(1.0);
                let mut sorted = candidates.to_vec();
                sorted.sort_by(f64::total_cmp);
                let iqr = percentile_sorted(&sorted, 75.0) - percentile_sorted(&sorted, 25.0);
                let spread = var.sqrt().min(iqr / 1.34);
                if spread > 0.0 {
                    0.9 * spread * verbatim
                } else {
                    verbatim
                }
            }
        }
    }
}

/// Linear-interpolation percentile of sorted data.
pub(crate) fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpiConfig {
    pub segment_length: f64,
    pub step_length: f64,
    pub peak_min_distance: f64,
    /// Fraction of the segment maximum.
    pub peak_min_prominence: f64,
    /// KDE grid resolution, seconds.
    pub kde_grid: f64,
    pub bandwidth: Bandwidth,
}

impl Default for PpiConfig {
    fn default() -> Self {
        PpiConfig {
            segment_length: 8.0,
            step_length: 2.0,
            peak_min_distance: 0.3,
            peak_min_prominence: 0.1,
            kde_grid: 1e-3,
            bandwidth: Bandwidth::Verbatim,
        }
    }
}

impl PpiConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_length > 0.0 && self.step_length <= self.segment_length) {
            return Err(Error::invalid("need 0 < step_length <= segment_length"));
        }
        if !(self.peak_min_distance > 0.0) {
            return Err(Error::invalid("peak_min_distance must be positive"));
        }
        if !(self.kde_grid > 0.0) {
            return Err(Error::invalid("kde_grid must be positive"));
        }
        if let Bandwidth::Fixed(h) = self.bandwidth {
            if !(h > 0.0) {
                return Err(Error::invalid("fixed bandwidth must be positive"));
            }
        }
        Ok(())
    }
}

/// Peak times (seconds) in one energy-plot segment.
///
/// Keeps local maxima whose prominence reaches `peak_min_prominence` times
/// the segment maximum, then enforces `peak_min_distance` greedily from the
/// tallest peak down.
pub fn detect_peaks(e: &EnergyPlot, cfg: &PpiConfig) -> Result<Vec<f64>> {
    let Some(dt) = e.step() else {
        return Ok(Vec::new());
    };
    let span = e.len() as f64 * dt;
    if span + 1e-9 < 2.0 * cfg.peak_min_distance {
        return Err(Error::invalid(format!(
            "segment of {span} s is shorter than twice the minimum peak distance"
        )));
    }
    let max = e.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Ok(Vec::new());
    }
    let filter = PeakFilter {
        min_distance: (cfg.peak_min_distance / dt - 1e-9).ceil() as usize,
        min_height: None,
        min_prominence: Some(cfg.peak_min_prominence * max),
    };
    Ok(find_peaks(&e.values, &filter)
        .into_iter()
        .map(|i| e.times[i])
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeEstimate {
    pub mode: f64,
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    candidates: Vec<f64>,
}

impl KdeEstimate {
    /// `f̂(p) = (1/(n h)) Σ K((p − c)/h)` with the standard Gaussian `K`.
    pub fn density_at(&self, p: f64) -> f64 {
        gaussian_kde(&self.candidates, self.bandwidth, p)
    }
}

fn gaussian_kde(candidates: &[f64], h: f64, p: f64) -> f64 {
    let norm = 1.0 / ((2.0 * PI).sqrt() * candidates.len() as f64 * h);
    norm * candidates
        .iter()
        .map(|c| {
            let u = (p - c) / h;
            (-0.5 * u * u).exp()
        })
        .sum::<f64>()
}

/// Relative slack under which two grid densities count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Mode of the Gaussian KDE over a uniform grid spanning
/// `[min − 3h, max + 3h]`. Ties go to the smallest grid point.
pub fn kde_mode(candidates: &[f64], grid_step: f64, bandwidth: Bandwidth) -> Result<KdeEstimate> {
    if candidates.is_empty() {
        return Err(Error::invalid("KDE needs at least one candidate"));
    }
    if let Some(i) = candidates.iter().position(|c| !c.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    if !(grid_step > 0.0) {
        return Err(Error::invalid("KDE grid step must be positive"));
    }
    let h = bandwidth.resolve(candidates);
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Numerical(format!("degenerate KDE bandwidth {h}")));
    }
    let min = candidates.iter().copied().fold(f64::INFINITY, f64::min);
    let max = candidates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = min - 3.0 * h;
    let count = ((max + 3.0 * h - lo) / grid_step + 1e-9).floor() as usize + 1;

    let grid: Vec<f64> = (0..count).map(|i| lo + i as f64 * grid_step).collect();
    let density: Vec<f64> = grid.iter().map(|&p| gaussian_kde(candidates, h, p)).collect();
    let mut best = 0;
    for i in 1..count {
        if density[i] > density[best] * (1.0 + TIE_TOLERANCE) {
            best = i;
        }
    }
    Ok(KdeEstimate {
        mode: grid[best],
        bandwidth: h,
        grid,
        density,
        candidates: candidates.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentFlag {
    Ok,
    /// No candidates survived; previous estimate reused.
    Carried,
    /// KDE mode fell outside the physiological range and was clamped.
    Clamped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpiSegment {
    pub t0: f64,
    pub ppi: f64,
    pub n_candidates: usize,
    pub flag: SegmentFlag,
}

/// Per-segment PPI estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpiSeries {
    pub segments: Vec<PpiSegment>,
    pub segment_length: f64,
}

impl PpiSeries {
    pub fn estimates(&self) -> Vec<(f64, f64)> {
        self.segments.iter().map(|s| (s.t0, s.ppi)).collect()
    }

    pub fn candidate_counts(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.n_candidates).collect()
    }

    /// Estimate of the segment whose center lies nearest to `t`
    /// (earlier segment on ties).
    pub fn ppi_at(&self, t: f64) -> Option<f64> {
        let half = self.segment_length / 2.0;
        let mut best: Option<(f64, f64)> = None;
        for s in &self.segments {
            let d = (s.t0 + half - t).abs();
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, s.ppi));
            }
        }
        best.map(|(_, p)| p)
    }
}

/// JSON report: `{"segments": [...], "config": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpiReport {
    pub segments: Vec<PpiSegment>,
    pub config: PpiConfig,
}

impl PpiReport {
    pub fn new(series: &PpiSeries, config: &PpiConfig) -> Self {
        PpiReport {
            segments: series.segments.clone(),
            config: *config,
        }
    }

    pub fn series(&self) -> PpiSeries {
        PpiSeries {
            segments: self.segments.clone(),
            segment_length: self.config.segment_length,
        }
    }
}

/// Segment start times and the pooled in-range candidates of each segment.
pub fn segment_candidates(plots: &[EnergyPlot], cfg: &PpiConfig) -> Result<Vec<(f64, Vec<f64>)>> {
    cfg.validate()?;
    let first = plots.first().ok_or_else(|| Error::invalid("no energy plots"))?;
    let dt = first
        .step()
        .ok_or_else(|| Error::invalid("energy plot needs at least two samples"))?;
    for p in plots {
        if p.len() != first.len() || p.times.first() != first.times.first() {
            return Err(Error::invalid(format!(
                "energy plot of channel {} is not aligned with channel {}",
                p.channel_id, first.channel_id
            )));
        }
    }
    let total = first.len() as f64 * dt;
    if total + 1e-9 < cfg.segment_length {
        return Err(Error::invalid(format!(
            "recording of {total} s is shorter than one segment ({} s)",
            cfg.segment_length
        )));
    }
    let segments = ((total - cfg.segment_length) / cfg.step_length + 1e-9).floor() as usize + 1;
    let seg_len = (cfg.segment_length / dt).round() as usize;

    let mut out = Vec::with_capacity(segments);
    for j in 0..segments {
        let start = (j as f64 * cfg.step_length / dt).round() as usize;
        let mut pool = Vec::new();
        for plot in plots {
            let seg = plot.slice(start, seg_len);
            let peaks = detect_peaks(&seg, cfg)?;
            pool.extend(
                peaks
                    .windows(2)
                    .map(|w| w[1] - w[0])
                    .filter(|d| (PPI_MIN..=PPI_MAX).contains(d)),
            );
        }
        out.push((first.times[0] + start as f64 * dt, pool));
    }
    Ok(out)
}

pub fn estimate_ppi(plots: &[EnergyPlot], cfg: &PpiConfig) -> Result<PpiSeries> {
    pooled_estimate(plots, cfg, |pool| Ok(kde_mode(pool, cfg.kde_grid, cfg.bandwidth)?.mode))
}

/// Baseline estimator: the plain mean of each segment's candidates.
pub fn estimate_ppi_mean(plots: &[EnergyPlot], cfg: &PpiConfig) -> Result<PpiSeries> {
    pooled_estimate(plots, cfg, |pool| Ok(pool.iter().sum::<f64>() / pool.len() as f64))
}

fn pooled_estimate(
    plots: &[EnergyPlot],
    cfg: &PpiConfig,
    pool_to_ppi: impl Fn(&[f64]) -> Result<f64>,
) -> Result<PpiSeries> {
    let mut segments: Vec<PpiSegment> = Vec::new();
    for (t0, pool) in segment_candidates(plots, cfg)? {
        if pool.is_empty() {
            let prev = segments.last().ok_or_else(|| {
                Error::Numerical(format!("no PPI candidates in the first segment (t0 = {t0} s)"))
            })?;
            segments.push(PpiSegment {
                t0,
                ppi: prev.ppi,
                n_candidates: 0,
                flag: SegmentFlag::Carried,
            });
            continue;
        }
        let mode = pool_to_ppi(&pool)?;
        let clamped = mode.clamp(PPI_MIN, PPI_MAX);
        segments.push(PpiSegment {
            t0,
            ppi: clamped,
            n_candidates: pool.len(),
            flag: if clamped == mode {
                SegmentFlag::Ok
            } else {
                SegmentFlag::Clamped
            },
        });
    }
    Ok(PpiSeries {
        segments,
        segment_length: cfg.segment_length,
    })
}
