//! End-to-end batch run: displacement channels in, concatenated ECG and
//! evaluation out, with every intermediate result written to disk.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ecg_ode::{generate_piece_with, PIECE_LEN};
use crate::error::{ensure_finite, Error, Result};
use crate::io::{self, Format};
use crate::metrics::{delineate, detect_r_peaks, evaluate, mdr, MetricsReport, MissBreakdown, MissReason};
use crate::ode_fit::{fit_trace, timing_prior, CycleTiming, FitConfig, FitReport};
use crate::ppi::{energy_plot, estimate_ppi, EnergyPlot, PpiConfig, PpiReport, PpiSeries};
use crate::signal_model::{synth_long_term, GroundTruth, PPI_MAX, PPI_MIN, LongTermSpec, MultiChannelSignal, VibrationModel};
use crate::spectral::{sst, Spectrogram, WaveletConfig};
use crate::trace::{interp_circular, resample_periodic, EcgTrace, Wave};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthInput {
    pub model: VibrationModel,
    pub long_term: LongTermSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InputSource {
    Synth(SynthInput),
    File {
        signal: PathBuf,
        #[serde(default)]
        truth: Option<PathBuf>,
    },
}

impl Default for InputSource {
    fn default() -> Self {
        InputSource::Synth(SynthInput::default())
    }
}

/// Spectrogram window handed to each cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    /// Window length centred on the cycle, seconds.
    pub window: f64,
    pub band_lo: f64,
    pub band_hi: f64,
    /// Column rate after resampling, Hz.
    pub rate: f64,
    /// Columns kept, taken from the middle of `window * rate`.
    pub columns: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            window: 4.0,
            band_lo: 1.0,
            band_hi: 25.0,
            rate: 30.0,
            columns: 118,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub input: InputSource,
    /// Reuse a saved PPI report instead of estimating.
    pub ppi_report: Option<PathBuf>,
    pub wavelet: WaveletConfig,
    pub sst_bins: usize,
    pub ppi: PpiConfig,
    pub segments: SegmentConfig,
    pub fit: FitConfig,
    /// Part of a beat interval between a cycle start and its first vibration.
    pub cycle_lead: f64,
    pub output_rate: f64,
    pub metrics: bool,
    /// Payload encoding of spectrogram artifacts.
    pub format: Format,
    pub threads: Option<usize>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: InputSource::default(),
            ppi_report: None,
            wavelet: WaveletConfig::default(),
            sst_bins: 64,
            ppi: PpiConfig::default(),
            segments: SegmentConfig::default(),
            fit: FitConfig::default(),
            cycle_lead: 0.25,
            output_rate: 200.0,
            metrics: true,
            format: Format::Bin,
            threads: None,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if let InputSource::File { signal, truth } = &self.input {
            for p in std::iter::once(signal).chain(truth) {
                if !p.exists() {
                    return Err(Error::invalid(format!("{} does not exist", p.display())));
                }
            }
        }
        if let Some(p) = &self.ppi_report {
            if !p.exists() {
                return Err(Error::invalid(format!("{} does not exist", p.display())));
            }
        }
        self.wavelet.validate()?;
        self.ppi.validate()?;
        self.fit.validate()?;
        if !(0.0..1.0).contains(&self.cycle_lead) {
            return Err(Error::invalid("cycle_lead must lie in [0, 1)"));
        }
        if !(self.output_rate > 0.0 && self.output_rate.is_finite()) {
            return Err(Error::invalid("output_rate must be positive"));
        }
        let s = &self.segments;
        if !(s.window > 0.0 && s.rate > 0.0 && s.band_lo < s.band_hi && s.columns >= 1) {
            return Err(Error::invalid("segment window, rate, band and columns must be positive and ordered"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads must be at least 1"));
        }
        Ok(())
    }
}

/// One reconstructed cycle on the signal's sample grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    /// Absolute start time, seconds.
    pub start: f64,
    pub ppi: f64,
    /// First sample and sample count in the source signal.
    pub first: usize,
    pub len: usize,
}

fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Per-sample median over channels.
pub fn consensus(sig: &MultiChannelSignal) -> Vec<f64> {
    let mut col = vec![0.0; sig.channels()];
    (0..sig.len())
        .map(|i| {
            for (c, ch) in col.iter_mut().zip(&sig.data) {
                *c = ch[i];
            }
            median(&col)
        })
        .collect()
}

/// Contiguous cycles tiled along the PPI series. The grid is phased so that
/// the strongest vibration in the first three beat intervals sits
/// `lead · ppi` after a cycle start, and each later boundary is pulled onto
/// the nearest vibration of typical strength. Where none is found, as inside
/// a movement burst, the boundary stays one estimated interval on.
pub fn cycle_grid(energy: &EnergyPlot, sample_rate: f64, series: &PpiSeries, lead: f64) -> Result<Vec<Cycle>> {
    if series.segments.is_empty() {
        return Err(Error::invalid("PPI series is empty"));
    }
    if energy.is_empty() {
        return Err(Error::invalid("energy plot is empty"));
    }
    let t0 = energy.times[0];
    let n = energy.len();
    let typical = median(&series.segments.iter().map(|s| s.ppi).collect::<Vec<_>>());
    let search = ((3.0 * typical * sample_rate).round() as usize).clamp(1, n);
    let anchor = (0..search)
        .max_by(|&a, &b| energy.values[a].total_cmp(&energy.values[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    let t_anchor = energy.times[anchor];
    let p = series.ppi_at(t_anchor).unwrap_or(typical);
    let mut start = t_anchor - lead * p;
    while start < t0 {
        start += p;
    }
    while start - p >= t0 {
        start -= p;
    }

    let mut cycles = Vec::new();
    let mut levels = vec![energy.values[anchor]];
    let mut first = ((start - t0) * sample_rate).round() as usize;
    let v = &energy.values;
    let argmax = |lo: usize, hi: usize| (lo..hi).max_by(|&a, &b| v[a].total_cmp(&v[b]).then(b.cmp(&a)));
    loop {
        let t = t0 + first as f64 / sample_rate;
        let ppi = series.ppi_at(t).unwrap_or(typical);
        let nominal = first + (ppi * sample_rate).round() as usize;
        if nominal > n {
            break;
        }
        let here = first + (lead * ppi * sample_rate).round() as usize;
        let next_ppi = series.ppi_at(t0 + nominal as f64 / sample_rate).unwrap_or(ppi);
        let lead_samples = (lead * next_ppi * sample_rate).round() as usize;
        let reach = (ANCHOR_REACH * next_ppi * sample_rate).round() as usize;
        let expected = nominal + lead_samples;
        let level = median(&levels);
        let typical_peak = |i: usize| v[i] >= ANCHOR_LEVEL.0 * level && v[i] <= ANCHOR_LEVEL.1 * level;

        let lo = expected.saturating_sub(reach).max(here + 1);
        let mut peak = argmax(lo, (expected + reach + 1).min(n)).filter(|&i| typical_peak(i));
        if peak.is_none() {
            // Estimate disagrees with the recording: take the next vibration
            // at any physiological interval.
            let lo = (here + (PPI_MIN * sample_rate).round() as usize).max(1);
            let hi = (here + (PPI_MAX * sample_rate).round() as usize).min(n.saturating_sub(1));
            peak = (lo..hi).find(|&i| v[i] >= v[i - 1] && v[i] > v[i + 1] && typical_peak(i));
        }
        let next = match peak {
            Some(i) if i > first + lead_samples => {
                levels.push(v[i]);
                i - lead_samples
            }
            _ => nominal,
        }
        .min(n);
        if next <= first {
            break;
        }
        let len = next - first;
        cycles.push(Cycle {
            start: t,
            ppi: len as f64 / sample_rate,
            first,
            len,
        });
        first = next;
    }
    Ok(cycles)
}

/// Search half-width around the expected next vibration, in beat intervals.
const ANCHOR_REACH: f64 = 0.35;
/// Accepted peak energy relative to the running median of earlier anchors.
const ANCHOR_LEVEL: (f64, f64) = (0.5, 2.0);

#[derive(Debug, Clone, PartialEq)]
pub struct CycleSegment {
    pub spectrogram: Spectrogram,
    pub padded_left: bool,
    pub padded_right: bool,
}

/// Spectrogram windows centred on each cycle, band-limited and resampled in
/// time, with zeros where the window leaves the recording.
pub fn slice_cycles(s: &Spectrogram, cycles: &[Cycle], cfg: &SegmentConfig) -> Result<Vec<CycleSegment>> {
    if cycles.is_empty() {
        return Err(Error::invalid("no cycles to slice"));
    }
    if s.cols() < 2 {
        return Err(Error::invalid("spectrogram needs at least two columns"));
    }
    let band = s.crop_band(cfg.band_lo, cfg.band_hi)?;
    let full = (cfg.window * cfg.rate).round() as usize;
    if cfg.columns > full {
        return Err(Error::invalid(format!("cannot keep {} of {full} columns", cfg.columns)));
    }
    let skip = (full - cfg.columns) / 2;
    let (t_first, t_last) = (band.times[0], band.times[band.cols() - 1]);
    let dt = (t_last - t_first) / (band.cols() - 1) as f64;

    cycles
        .iter()
        .map(|c| {
            let centre = c.start + c.ppi / 2.0;
            let times: Vec<f64> = (skip..skip + cfg.columns)
                .map(|j| centre - cfg.window / 2.0 + j as f64 / cfg.rate)
                .collect();
            let rows = band.rows();
            let mut power = vec![0.0; rows * times.len()];
            let (mut left, mut right) = (false, false);
            for (j, &t) in times.iter().enumerate() {
                if t < t_first - 1e-9 {
                    left = true;
                    continue;
                }
                if t > t_last + 1e-9 {
                    right = true;
                    continue;
                }
                let pos = ((t - t_first) / dt).clamp(0.0, (band.cols() - 1) as f64);
                let i = (pos.floor() as usize).min(band.cols() - 2);
                let frac = pos - i as f64;
                for r in 0..rows {
                    let row = band.row(r);
                    power[r * times.len() + j] = row[i] + (row[i + 1] - row[i]) * frac;
                }
            }
            Ok(CycleSegment {
                spectrogram: Spectrogram::new(power, band.freqs.clone(), times, band.method)?,
                padded_left: left,
                padded_right: right,
            })
        })
        .collect()
}

/// Pieces resampled to their cycle lengths and joined end to end.
pub fn concat_pieces(pieces: &[Vec<f64>], ppi: &[f64], output_rate: f64) -> Result<EcgTrace> {
    if pieces.len() != ppi.len() {
        return Err(Error::invalid(format!("{} pieces for {} beat intervals", pieces.len(), ppi.len())));
    }
    let mut out = Vec::new();
    for (piece, p) in pieces.iter().zip(ppi) {
        ensure_finite(piece)?;
        let len = (p * output_rate).round() as usize;
        out.extend(resample_periodic(piece, len));
    }
    EcgTrace::new(out, output_rate)
}

/// Noise-free reference ECG on `[0, duration)`: one generated beat per true
/// cycle, placed by the same timing rule the reconstruction uses.
pub fn truth_ecg(truth: &GroundTruth, duration: f64, rate: f64, fit: &FitConfig) -> Result<EcgTrace> {
    let n = (duration * rate).round() as usize;
    let pieces: Vec<Vec<f64>> = truth
        .cycles
        .par_iter()
        .zip(&truth.ppi)
        .map(|(c, &ppi)| {
            let timing = CycleTiming {
                t1: c.t1 - c.start,
                t2: Some(c.t2 - c.start),
            };
            let (p, tau) = timing_prior(&timing, ppi, fit.lag, &fit.piece)?;
            generate_piece_with(&p, 2.0 * PI / ppi, tau, &fit.piece)
        })
        .collect::<Result<_>>()?;
    let mut samples = vec![0.0; n];
    let mut c = 0;
    for (i, v) in samples.iter_mut().enumerate() {
        let t = i as f64 / rate;
        while c + 1 < truth.cycles.len() && truth.cycles[c + 1].start <= t {
            c += 1;
        }
        let cyc = &truth.cycles[c];
        let phase = (t - cyc.start) / truth.ppi[c];
        if (0.0..1.0).contains(&phase) {
            *v = interp_circular(&pieces[c], phase * pieces[c].len() as f64);
        }
    }
    let reach = (0.03 * rate).round() as usize;
    let mut r = Vec::new();
    for cyc in &truth.cycles {
        let want = ((cyc.t1 - fit.lag) * rate).round();
        if want < 0.0 || want as usize >= n {
            continue;
        }
        let w = want as usize;
        let (lo, hi) = (w.saturating_sub(reach), (w + reach + 1).min(n));
        let idx = (lo..hi).max_by(|&a, &b| samples[a].total_cmp(&samples[b]).then(b.cmp(&a))).unwrap_or(w);
        if r.last() != Some(&idx) {
            r.push(idx);
        }
    }
    delineate(&EcgTrace::new(samples, rate)?, &r)
}

/// Samples `[from, from + len)` with annotations shifted to match.
fn crop(trace: &EcgTrace, from: usize, len: usize) -> Result<EcgTrace> {
    let to = (from + len).min(trace.len());
    let from = from.min(to);
    let mut out = EcgTrace::new(trace.samples[from..to].to_vec(), trace.sample_rate)?;
    for w in Wave::ALL {
        let idx: Vec<usize> = trace
            .peak_indices(w)
            .iter()
            .filter(|&&i| i >= from && i < to)
            .map(|i| i - from)
            .collect();
        if !idx.is_empty() {
            out = out.with_peaks(w, idx)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub index: usize,
    pub start: f64,
    pub ppi: f64,
    /// Vibration times relative to the cycle start; absent when none was found.
    pub timing: Option<CycleTiming>,
    pub r_index: Option<usize>,
    pub fit: Option<FitReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeatRecord {
    /// Absolute time of the true R peak, seconds.
    pub time: f64,
    pub missed: Option<MissReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdrSummary {
    pub total_beats: usize,
    pub missed: usize,
    pub breakdown: MissBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub channels: usize,
    pub cycles: usize,
    /// Absolute start of the reconstructed span, seconds.
    pub start_time: f64,
    pub duration: f64,
    pub output_rate: f64,
    pub ppi_segments: usize,
    pub ppi_median: f64,
    /// Per-segment absolute error against the true mean beat interval.
    pub ppi_median_abs_error: Option<f64>,
    pub cycles_without_vibration: Vec<usize>,
    pub metrics: Option<MetricsReport>,
    pub mdr: Option<MdrSummary>,
    /// SHA-256 of every other artifact, by file name.
    pub artifacts: BTreeMap<String, String>,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.at_stage(name, None))
}

/// Energy plot of each channel's synchrosqueezed spectrogram.
pub fn channel_energy(sig: &MultiChannelSignal, wavelet: &WaveletConfig, bins: usize) -> Result<Vec<EnergyPlot>> {
    sig.data
        .par_iter()
        .enumerate()
        .map(|(c, x)| {
            let mut e = energy_plot(&sst(x, sig.sample_rate, wavelet, bins)?, c);
            for t in &mut e.times {
                *t += sig.start_time;
            }
            Ok(e)
        })
        .collect()
}

fn mean_true_ppi(truth: &GroundTruth, t0: f64, len: f64) -> Option<f64> {
    let inside: Vec<f64> = truth
        .cycles
        .iter()
        .zip(&truth.ppi)
        .filter(|(c, _)| c.t1 >= t0 && c.t1 < t0 + len)
        .map(|(_, p)| *p)
        .collect();
    (!inside.is_empty()).then(|| inside.iter().sum::<f64>() / inside.len() as f64)
}

/// Runs every stage and writes the artifacts into `out`.
pub fn run_pipeline(cfg: &PipelineConfig, out: &Path) -> Result<PipelineSummary> {
    cfg.validate()?;
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::invalid(e.to_string()))?
            .install(|| run_stages(cfg, out)),
        None => run_stages(cfg, out),
    }
}

fn run_stages(cfg: &PipelineConfig, out: &Path) -> Result<PipelineSummary> {
    fs::create_dir_all(out)?;
    let mut files: Vec<PathBuf> = Vec::new();

    let (signal, truth) = stage(
        "input",
        match &cfg.input {
            InputSource::Synth(s) => {
                let spec = LongTermSpec {
                    seed: cfg.seed,
                    ..s.long_term.clone()
                };
                synth_long_term(&s.model, &spec).map(|r| (r.signal, Some(r.truth)))
            }
            InputSource::File { signal, truth } => io::read_signal_csv(signal).and_then(|sig| {
                let t = truth.as_deref().map(io::read_json::<GroundTruth>).transpose()?;
                Ok((sig, t))
            }),
        },
    )?;
    let fs_in = signal.sample_rate;
    files.push(out.join("signal.csv"));
    io::write_signal_csv(&files[0], &signal)?;
    if let Some(t) = &truth {
        let p = out.join("truth.json");
        io::write_json(&p, t)?;
        files.push(p);
    }

    let series = match &cfg.ppi_report {
        Some(p) => io::read_json::<PpiReport>(p)?.series(),
        None => {
            let plots = stage("energy", channel_energy(&signal, &cfg.wavelet, cfg.sst_bins))?;
            stage("ppi", estimate_ppi(&plots, &cfg.ppi))?
        }
    };
    let p = out.join("ppi.json");
    io::write_json(&p, &PpiReport::new(&series, &cfg.ppi))?;
    files.push(p);

    let radar = consensus(&signal);
    let mut spec = stage("sst", sst(&radar, fs_in, &cfg.wavelet, cfg.sst_bins))?;
    for t in &mut spec.times {
        *t += signal.start_time;
    }
    files.extend(io::write_spectrogram(out, "sst", &spec, cfg.format)?);

    let cycles = stage("cycles", cycle_grid(&energy_plot(&spec, 0), fs_in, &series, cfg.cycle_lead))?;
    if cycles.is_empty() {
        return Err(Error::Numerical("recording is too short for one cycle".into()).at_stage("cycles", None));
    }
    let segments = stage("slice", slice_cycles(&spec, &cycles, &cfg.segments))?;
    write_segments(out, &segments, &mut files)?;

    let fits: Vec<Result<Option<crate::ode_fit::TraceFit>>> = cycles
        .par_iter()
        .enumerate()
        .map(|(k, c)| {
            let x = &radar[c.first..c.first + c.len];
            match fit_trace(x, fs_in, c.ppi, &cfg.fit, cfg.seed.wrapping_add(k as u64)) {
                Ok(f) => Ok(Some(f)),
                Err(Error::NoVibration) => Ok(None),
                Err(e) => Err(e.at_stage("fit", Some(k))),
            }
        })
        .collect();
    let mut records = Vec::with_capacity(cycles.len());
    let mut pieces = Vec::with_capacity(cycles.len());
    let mut silent = Vec::new();
    for (k, (c, f)) in cycles.iter().zip(fits).enumerate() {
        let f = f?;
        if f.is_none() {
            silent.push(k);
        }
        pieces.push(f.as_ref().map_or_else(|| vec![0.0; PIECE_LEN], |f| f.piece.clone()));
        records.push(CycleRecord {
            index: k,
            start: c.start,
            ppi: c.ppi,
            timing: f.as_ref().map(|f| f.timing),
            r_index: f.as_ref().map(|f| f.r_index),
            fit: f.map(|f| f.fit),
        });
    }
    let p = out.join("cycles.json");
    io::write_json(&p, &records)?;
    files.push(p);
    write_pieces(&out.join("pieces.csv"), &pieces)?;
    files.push(out.join("pieces.csv"));

    let ppis: Vec<f64> = cycles.iter().map(|c| c.ppi).collect();
    let recon = stage("concat", concat_pieces(&pieces, &ppis, cfg.output_rate))?;
    let start_time = cycles[0].start;
    let times: Vec<f64> = (0..recon.len()).map(|i| start_time + i as f64 / cfg.output_rate).collect();

    let mut metrics = None;
    let mut mdr_summary = None;
    let mut ppi_error = None;
    let truth_crop = match (&truth, cfg.metrics) {
        (Some(t), true) => {
            let duration = signal.len() as f64 / fs_in;
            let full = stage("truth", truth_ecg(t, duration, cfg.output_rate, &cfg.fit))?;
            let from = ((start_time - signal.start_time) * cfg.output_rate).round() as usize;
            Some(crop(&full, from, recon.len())?)
        }
        _ => None,
    };
    let mut columns: Vec<(&str, &[f64])> = vec![("t", &times), ("recon", &recon.samples)];
    if let Some(tc) = &truth_crop {
        if tc.len() == recon.len() {
            columns.push(("truth", &tc.samples));
        }
    }
    let (names, cols): (Vec<&str>, Vec<&[f64]>) = columns.into_iter().unzip();
    io::write_columns_csv(&out.join("ecg.csv"), &names, &cols)?;
    files.push(out.join("ecg.csv"));

    if let (Some(t), Some(tc)) = (&truth, &truth_crop) {
        let n = recon.len().min(tc.len());
        let recon_n = EcgTrace::new(recon.samples[..n].to_vec(), recon.sample_rate)?;
        let truth_n = crop(tc, 0, n)?;
        let recon_n = stage("metrics", delineate(&recon_n, &detect_r_peaks(&recon_n)))?;
        if !truth_n.peak_indices(Wave::R).is_empty() {
            let report = stage("metrics", evaluate(&recon_n, &truth_n))?;
            let beats = stage("metrics", mdr(&recon_n, &truth_n))?;
            let r_times = truth_n.peak_times(Wave::R);
            let records: Vec<BeatRecord> = beats
                .beats
                .iter()
                .map(|b| BeatRecord {
                    time: start_time + r_times[b.truth_index],
                    missed: b.missed,
                })
                .collect();
            let p = out.join("beats.json");
            io::write_json(&p, &records)?;
            files.push(p);
            let p = out.join("metrics.json");
            io::write_json(&p, &report)?;
            files.push(p);
            mdr_summary = Some(MdrSummary {
                total_beats: beats.total_beats,
                missed: beats.missed,
                breakdown: beats.breakdown,
            });
            metrics = Some(report);
        }
        let errs: Vec<f64> = series
            .segments
            .iter()
            .filter_map(|s| mean_true_ppi(t, s.t0, series.segment_length).map(|m| (s.ppi - m).abs()))
            .collect();
        if !errs.is_empty() {
            ppi_error = Some(median(&errs));
        }
    }

    let mut artifacts = BTreeMap::new();
    for f in &files {
        let bytes = fs::read(f)?;
        let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        artifacts.insert(name, format!("{:x}", Sha256::digest(&bytes)));
    }
    let summary = PipelineSummary {
        channels: signal.channels(),
        cycles: cycles.len(),
        start_time,
        duration: recon.duration(),
        output_rate: cfg.output_rate,
        ppi_segments: series.segments.len(),
        ppi_median: median(&series.segments.iter().map(|s| s.ppi).collect::<Vec<_>>()),
        ppi_median_abs_error: ppi_error,
        cycles_without_vibration: silent,
        metrics,
        mdr: mdr_summary,
        artifacts,
    };
    io::write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SegmentManifest {
    count: usize,
    rows: usize,
    cols: usize,
    freqs: Vec<f64>,
    /// Time of each segment's first column.
    starts: Vec<f64>,
    padded_left: Vec<usize>,
    padded_right: Vec<usize>,
    payload: String,
}

fn write_segments(out: &Path, segments: &[CycleSegment], files: &mut Vec<PathBuf>) -> Result<()> {
    let first = &segments[0].spectrogram;
    let mut payload = Vec::new();
    for s in segments {
        payload.extend(io::f64_le_bytes(&s.spectrogram.power));
    }
    fs::write(out.join("segments.bin"), payload)?;
    let manifest = SegmentManifest {
        count: segments.len(),
        rows: first.rows(),
        cols: first.cols(),
        freqs: first.freqs.clone(),
        starts: segments.iter().map(|s| s.spectrogram.times[0]).collect(),
        padded_left: (0..segments.len()).filter(|&k| segments[k].padded_left).collect(),
        padded_right: (0..segments.len()).filter(|&k| segments[k].padded_right).collect(),
        payload: "segments.bin".into(),
    };
    io::write_json(&out.join("segments.json"), &manifest)?;
    files.push(out.join("segments.json"));
    files.push(out.join("segments.bin"));
    Ok(())
}

/// All pieces as `cycle,index,z`.
fn write_pieces(path: &Path, pieces: &[Vec<f64>]) -> Result<()> {
    let mut s = String::from("cycle,index,z\n");
    for (k, piece) in pieces.iter().enumerate() {
        for (i, v) in piece.iter().enumerate() {
            s.push_str(&format!("{k},{i},{}\n", io::fmt_f64(*v)));
        }
    }
    fs::write(path, s)?;
    Ok(())
}
