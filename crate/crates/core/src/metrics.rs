//! Reconstruction quality: waveform error, correlation, missed beats and
//! characteristic-peak timing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::peaks::{find_peaks, PeakFilter};
use crate::ppi::percentile_sorted;
use crate::trace::{EcgTrace, Wave};

pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::invalid("rmse of empty series"));
    }
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((ss / a.len() as f64).sqrt())
}

/// Sample Pearson correlation.
pub fn pcc(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::invalid("correlation needs at least two samples"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::invalid("correlation is undefined for a constant series"));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MdrConfig {
    /// Largest R-peak time difference that still counts as a match, seconds.
    pub match_tolerance: f64,
    /// Reconstructed R peaks closer than this to the matched one spoil it.
    pub min_separation: f64,
    /// Smallest acceptable reconstructed-to-true R amplitude ratio.
    pub amplitude_ratio: f64,
    /// Half-width of the window whose median is the local baseline, seconds.
    pub baseline_window: f64,
}

impl Default for MdrConfig {
    fn default() -> Self {
        MdrConfig {
            match_tolerance: 0.15,
            min_separation: 0.3,
            amplitude_ratio: 0.7,
            baseline_window: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissReason {
    /// No reconstructed R within the match tolerance.
    Unmatched,
    /// Another reconstructed R crowds the matched one.
    Crowded,
    /// The matched R is too small.
    Attenuated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeatVerdict {
    pub truth_index: usize,
    pub matched: Option<usize>,
    pub missed: Option<MissReason>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissBreakdown {
    pub unmatched: usize,
    pub crowded: usize,
    pub attenuated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdrReport {
    pub total_beats: usize,
    pub missed: usize,
    pub mdr: f64,
    pub breakdown: MissBreakdown,
    pub beats: Vec<BeatVerdict>,
}

/// Brings both traces to the higher of their sample rates.
fn common_rate(a: &EcgTrace, b: &EcgTrace) -> Result<(EcgTrace, EcgTrace)> {
    let rate = a.sample_rate.max(b.sample_rate);
    Ok((a.resampled(rate)?, b.resampled(rate)?))
}

fn baseline_relative(trace: &EcgTrace, idx: usize, half_window: f64) -> f64 {
    let half = (half_window * trace.sample_rate).round() as usize;
    let lo = idx.saturating_sub(half);
    let hi = (idx + half + 1).min(trace.len());
    let mut w = trace.samples[lo..hi].to_vec();
    w.sort_by(f64::total_cmp);
    let m = w.len();
    let median = if m % 2 == 1 { w[m / 2] } else { 0.5 * (w[m / 2 - 1] + w[m / 2]) };
    trace.samples[idx] - median
}

/// One-to-one nearest matching of truth to reconstructed times within `tol`;
/// closest pairs first, ties to the earlier truth beat.
fn match_beats(truth: &[f64], recon: &[f64], tol: f64) -> Vec<Option<usize>> {
    let mut pairs = Vec::new();
    for (i, t) in truth.iter().enumerate() {
        for (j, r) in recon.iter().enumerate() {
            let d = (t - r).abs();
            if d <= tol + 1e-12 {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut by_truth = vec![None; truth.len()];
    let mut used = vec![false; recon.len()];
    for (_, i, j) in pairs {
        if by_truth[i].is_none() && !used[j] {
            by_truth[i] = Some(j);
            used[j] = true;
        }
    }
    by_truth
}

pub fn mdr(recon: &EcgTrace, truth: &EcgTrace) -> Result<MdrReport> {
    mdr_with(recon, truth, &MdrConfig::default())
}

pub fn mdr_with(recon: &EcgTrace, truth: &EcgTrace, cfg: &MdrConfig) -> Result<MdrReport> {
    if truth.peak_indices(Wave::R).is_empty() {
        return Err(Error::invalid("truth trace has no R annotations"));
    }
    let (recon, truth) = common_rate(recon, truth)?;
    let t_truth = truth.peak_times(Wave::R);
    let t_recon = recon.peak_times(Wave::R);
    let matches = match_beats(&t_truth, &t_recon, cfg.match_tolerance);

    let mut breakdown = MissBreakdown::default();
    let mut beats = Vec::with_capacity(t_truth.len());
    for (i, m) in matches.iter().enumerate() {
        let missed = match *m {
            None => Some(MissReason::Unmatched),
            Some(j) => {
                let crowded = t_recon
                    .iter()
                    .enumerate()
                    .any(|(k, t)| k != j && (t - t_recon[j]).abs() < cfg.min_separation);
                let ri = recon.peak_indices(Wave::R)[j];
                let ti = truth.peak_indices(Wave::R)[i];
                let amp_r = baseline_relative(&recon, ri.min(recon.len() - 1), cfg.baseline_window);
                let amp_t = baseline_relative(&truth, ti, cfg.baseline_window);
                if crowded {
                    Some(MissReason::Crowded)
                } else if amp_r < cfg.amplitude_ratio * amp_t {
                    Some(MissReason::Attenuated)
                } else {
                    None
                }
            }
        };
        match missed {
            Some(MissReason::Unmatched) => breakdown.unmatched += 1,
            Some(MissReason::Crowded) => breakdown.crowded += 1,
            Some(MissReason::Attenuated) => breakdown.attenuated += 1,
            None => {}
        }
        beats.push(BeatVerdict {
            truth_index: i,
            matched: *m,
            missed,
        });
    }
    let total_beats = t_truth.len();
    let missed = breakdown.unmatched + breakdown.crowded + breakdown.attenuated;
    Ok(MdrReport {
        total_beats,
        missed,
        mdr: missed as f64 / total_beats as f64,
        breakdown,
        beats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub median: f64,
    pub p90: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingErrors {
    /// Absolute errors in seconds, one per usable beat.
    pub errors: BTreeMap<Wave, Vec<f64>>,
}

impl TimingErrors {
    pub fn summary(&self) -> BTreeMap<Wave, TimingSummary> {
        self.errors
            .iter()
            .filter(|(_, e)| !e.is_empty())
            .map(|(w, e)| {
                let mut s = e.clone();
                s.sort_by(f64::total_cmp);
                (
                    *w,
                    TimingSummary {
                        median: percentile_sorted(&s, 50.0),
                        p90: percentile_sorted(&s, 90.0),
                    },
                )
            })
            .collect()
    }
}

/// Farthest a Q, S or T annotation may sit from its own R peak, seconds.
const BEAT_REACH: f64 = 0.6;

/// Annotation of `wave` belonging to the beat whose R is at `r`.
fn beat_member(trace: &EcgTrace, wave: Wave, r: usize) -> Option<usize> {
    let reach = (BEAT_REACH * trace.sample_rate).round() as usize;
    let idx = trace.peak_indices(wave);
    match wave {
        Wave::R => Some(r),
        Wave::P | Wave::Q => idx.iter().rev().copied().find(|&i| i <= r).filter(|&i| r - i <= reach),
        Wave::S | Wave::T => idx.iter().copied().find(|&i| i >= r).filter(|&i| i - r <= reach),
    }
}

/// Per-wave absolute timing errors over beats that survive the missed-beat
/// rules.
pub fn peak_timing_error(recon: &EcgTrace, truth: &EcgTrace, waves: &[Wave]) -> Result<TimingErrors> {
    let report = mdr(recon, truth)?;
    let (recon, truth) = common_rate(recon, truth)?;
    let fs = truth.sample_rate;
    let mut errors: BTreeMap<Wave, Vec<f64>> = waves.iter().map(|w| (*w, Vec::new())).collect();
    let mut used = 0;
    for beat in report.beats.iter().filter(|b| b.missed.is_none()) {
        let j = beat.matched.expect("kept beats are matched");
        let tr = truth.peak_indices(Wave::R)[beat.truth_index];
        let rr = recon.peak_indices(Wave::R)[j];
        used += 1;
        for w in waves {
            if let (Some(a), Some(b)) = (beat_member(&recon, *w, rr), beat_member(&truth, *w, tr)) {
                errors.get_mut(w).unwrap().push((a as f64 - b as f64).abs() / fs);
            }
        }
    }
    if used == 0 {
        return Err(Error::invalid("no matched beats to time"));
    }
    Ok(TimingErrors { errors })
}

/// R peaks: local maxima above half the trace maximum, at least 0.3 s apart.
pub fn detect_r_peaks(trace: &EcgTrace) -> Vec<usize> {
    if trace.is_empty() {
        return Vec::new();
    }
    let max = trace.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    find_peaks(
        &trace.samples,
        &PeakFilter {
            min_distance: ((0.3 * trace.sample_rate).round() as usize).max(1),
            min_height: Some(0.5 * max),
            min_prominence: None,
        },
    )
}

/// Q and S as the minima within 80 ms before and after each R, T as the
/// maximum 100 to 450 ms after it (never past the next R).
pub fn delineate(trace: &EcgTrace, r_peaks: &[usize]) -> Result<EcgTrace> {
    let fs = trace.sample_rate;
    let n = trace.len();
    let x = &trace.samples;
    let qs = (0.08 * fs).round() as usize;
    let (t_lo, t_hi) = ((0.1 * fs).round() as usize, (0.45 * fs).round() as usize);
    let arg = |lo: usize, hi: usize, max: bool| -> Option<usize> {
        (lo..hi).reduce(|a, b| {
            let better = if max { x[b] > x[a] } else { x[b] < x[a] };
            if better {
                b
            } else {
                a
            }
        })
    };
    let (mut q, mut s, mut t) = (Vec::new(), Vec::new(), Vec::new());
    for (k, &r) in r_peaks.iter().enumerate() {
        let next = r_peaks.get(k + 1).copied().unwrap_or(n);
        if let Some(i) = arg(r.saturating_sub(qs), r, false) {
            q.push(i);
        }
        if let Some(i) = arg(r + 1, (r + qs + 1).min(next), false) {
            s.push(i);
        }
        if let Some(i) = arg(r + t_lo, (r + t_hi + 1).min(next).min(n), true) {
            t.push(i);
        }
    }
    let dedup = |mut v: Vec<usize>| {
        v.dedup();
        v
    };
    trace
        .clone()
        .with_peaks(Wave::R, r_peaks.to_vec())?
        .with_peaks(Wave::Q, dedup(q))?
        .with_peaks(Wave::S, dedup(s))?
        .with_peaks(Wave::T, dedup(t))
}

/// Summary in the layout of the reconstruction tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rmse: f64,
    pub pcc: f64,
    pub mdr: f64,
    pub timing: BTreeMap<Wave, TimingSummary>,
}

/// Full evaluation of a reconstruction against annotated truth. The recon
/// trace is annotated here if it carries no R peaks.
pub fn evaluate(recon: &EcgTrace, truth: &EcgTrace) -> Result<MetricsReport> {
    ensure_finite(&recon.samples)?;
    ensure_finite(&truth.samples)?;
    let recon = if recon.peak_indices(Wave::R).is_empty() {
        delineate(recon, &detect_r_peaks(recon))?
    } else {
        recon.clone()
    };
    let (a, b) = common_rate(&recon, truth)?;
    let n = a.len().min(b.len());
    let mdr = mdr(&recon, truth)?;
    let timing = match peak_timing_error(&recon, truth, &[Wave::Q, Wave::R, Wave::S, Wave::T]) {
        Ok(t) => t.summary(),
        Err(_) => BTreeMap::new(),
    };
    Ok(MetricsReport {
        rmse: rmse(&a.samples[..n], &b.samples[..n])?,
        pcc: pcc(&a.samples[..n], &b.samples[..n])?,
        mdr: mdr.mdr,
        timing,
    })
}
