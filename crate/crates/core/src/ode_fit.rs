//! Derivative-free recovery of ODE scaling values and lag from an ECG piece,
//! and the mapping from one radar cycle to an ECG piece.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ecg_ode::{generate_piece_with, OdeDefaults, PieceOptions, ANGLE_NUDGE, N_SCALES};
use crate::error::{ensure_finite, Error, Result};
use crate::metrics::rmse;
use crate::ppi::energy_plot;
use crate::signal_model::channel_rng;
use crate::simplex::{minimize, SimplexOptions};
use crate::spectral::{sst, WaveletConfig, MIN_SAMPLES_PER_OSCILLATION};
use crate::trace::{min_max_normalize, Wave};

/// Objective penalty for parameter combinations the model cannot represent.
const INFEASIBLE: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Objective evaluations allowed per restart.
    pub max_iterations: usize,
    /// Simplex convergence threshold on the residual spread.
    pub tolerance: f64,
    pub restarts: usize,
    /// Residual at which the search stops early.
    pub good_enough: f64,
    /// Angular velocity used when none is implied by a beat interval.
    pub omega: f64,
    /// Delay of the first mechanical vibration behind the R peak, seconds.
    pub lag: f64,
    /// Minimum peak-to-median ratio of the smoothed energy plot.
    pub detection_ratio: f64,
    pub piece: PieceOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iterations: 2000,
            tolerance: 1e-7,
            restarts: 5,
            good_enough: 1e-9,
            omega: 2.0 * PI,
            lag: 0.02,
            detection_ratio: 8.0,
            piece: PieceOptions::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if self.restarts < 1 {
            return Err(Error::invalid("need at least one restart"));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::invalid("omega must be positive"));
        }
        if !(self.lag >= 0.0 && self.lag.is_finite()) {
            return Err(Error::invalid("lag must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub p: Vec<f64>,
    /// Seconds, in `[0, 2pi/omega)`.
    pub tau: f64,
    pub omega: f64,
    pub residual: f64,
    pub piece: Vec<f64>,
    pub evaluations: usize,
    pub iterations: usize,
    /// Restart that produced the result.
    pub restart: usize,
    /// Best residual after each simplex iteration of the winning restart.
    #[serde(skip)]
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub p: Vec<f64>,
    pub tau: f64,
    pub omega: f64,
    pub residual: f64,
    pub iterations: usize,
    pub evaluations: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_s: Option<f64>,
}

impl FitReport {
    pub fn new(fit: &FitResult, wall_time_s: Option<f64>) -> Self {
        FitReport {
            p: fit.p.clone(),
            tau: fit.tau,
            omega: fit.omega,
            residual: fit.residual,
            iterations: fit.iterations,
            evaluations: fit.evaluations,
            wall_time_s,
        }
    }
}

/// Search point: 15 scaling values then the lag as a fraction of the period.
fn decode(x: &[f64]) -> (Vec<f64>, f64) {
    let p = x[..N_SCALES].iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    (p, x[N_SCALES].rem_euclid(1.0))
}

/// Circular shift (in samples) that best aligns `piece` with `target`.
fn best_shift(piece: &[f64], target: &[f64]) -> usize {
    let n = piece.len();
    let mut best = (f64::NEG_INFINITY, 0);
    for s in 0..n {
        let c: f64 = target.iter().enumerate().map(|(i, t)| t * piece[(i + s) % n]).sum();
        if c > best.0 {
            best = (c, s);
        }
    }
    best.1
}

struct Problem<'a> {
    target: &'a [f64],
    omega: f64,
    period: f64,
    opts: &'a PieceOptions,
}

impl Problem<'_> {
    fn objective(&self, x: &[f64]) -> f64 {
        let (p, frac) = decode(x);
        match generate_piece_with(&p, self.omega, frac * self.period, self.opts) {
            Ok(g) => rmse(&g, self.target).unwrap_or(INFEASIBLE),
            Err(_) => INFEASIBLE,
        }
    }

    /// Start point for `p` with the lag aligned by cross-correlation.
    fn start(&self, p: &[f64]) -> Vec<f64> {
        let frac = match generate_piece_with(p, self.omega, 0.0, self.opts) {
            Ok(g) => best_shift(&g, self.target) as f64 / g.len() as f64,
            Err(_) => 0.0,
        };
        let mut x = p.to_vec();
        x.push(frac);
        x
    }

    fn simplex_options(&self, cfg: &FitConfig) -> SimplexOptions {
        let mut step = vec![0.25; N_SCALES + 1];
        step[10..N_SCALES].fill(0.3);
        step[N_SCALES] = 2.0 / self.target.len() as f64;
        SimplexOptions {
            max_evaluations: cfg.max_iterations,
            tolerance: cfg.tolerance,
            initial_step: step,
            target: cfg.good_enough,
        }
    }
}

fn flat_point() -> Vec<f64> {
    let mut p = vec![0.0; N_SCALES];
    p[..5].fill(-1.0);
    p
}

/// Fits the generator to `target` (normalized to `[0, 1]` first unless it
/// already spans exactly that range).
pub fn fit_piece(target: &[f64], cfg: &FitConfig, seed: u64) -> Result<FitResult> {
    fit_piece_from(target, cfg, seed, None, cfg.omega)
}

/// As [`fit_piece`], with an optional warm start `(p, tau)` replacing the
/// all-zero first start, and an explicit angular velocity.
pub fn fit_piece_from(
    target: &[f64],
    cfg: &FitConfig,
    seed: u64,
    warm: Option<(&[f64], f64)>,
    omega: f64,
) -> Result<FitResult> {
    cfg.validate()?;
    ensure_finite(target)?;
    if target.len() < 2 {
        return Err(Error::invalid("target piece needs at least two samples"));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::invalid("omega must be positive"));
    }
    let lo = target.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = target.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let target: Vec<f64> = if lo == 0.0 && hi == 1.0 {
        target.to_vec()
    } else {
        min_max_normalize(target)
    };
    let mut opts = cfg.piece;
    opts.length = target.len();
    let period = 2.0 * PI / omega;
    let problem = Problem {
        target: &target,
        omega,
        period,
        opts: &opts,
    };

    let starts: Vec<Vec<f64>> = (0..cfg.restarts)
        .map(|r| match (r, warm) {
            (0, Some((p, tau))) => {
                let mut x: Vec<f64> = p.to_vec();
                x.push((tau / period).rem_euclid(1.0));
                x
            }
            (0, None) => problem.start(&[0.0; N_SCALES]),
            (1, _) => problem.start(&flat_point()),
            _ => {
                let mut rng = channel_rng(seed, r as u64);
                let p: Vec<f64> = (0..N_SCALES).map(|_| rng.random_range(-0.5..=0.5)).collect();
                problem.start(&p)
            }
        })
        .collect();
    if starts[0].len() != N_SCALES + 1 {
        return Err(Error::invalid(format!("warm start needs {N_SCALES} scaling values")));
    }

    let simplex = problem.simplex_options(cfg);
    let run = |r: usize| minimize(|x| problem.objective(x), &starts[r], &simplex);

    // The first start alone is often enough; the others only run if it is not.
    let first = run(0);
    let mut runs = vec![(0, first)];
    if runs[0].1.value > cfg.good_enough && cfg.restarts > 1 {
        let rest: Vec<_> = (1..cfg.restarts).into_par_iter().map(|r| (r, run(r))).collect();
        runs.extend(rest);
    }
    let evaluations = runs.iter().map(|(_, m)| m.evaluations).sum();
    let (restart, best) = runs
        .into_iter()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
        .expect("at least one restart");

    let (p, frac) = decode(&best.x);
    let tau = frac * period;
    let piece = generate_piece_with(&p, omega, tau, &opts)?;
    let residual = rmse(&piece, &target)?;
    Ok(FitResult {
        p,
        tau,
        omega,
        residual,
        piece,
        evaluations,
        iterations: best.iterations,
        restart,
        history: best.history,
    })
}

/// Vibration timing read off one radar cycle, seconds from the cycle start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleTiming {
    pub t1: f64,
    pub t2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFit {
    pub piece: Vec<f64>,
    pub r_index: usize,
    pub timing: CycleTiming,
    pub fit: FitReport,
}

fn moving_average(x: &[f64], half: usize) -> Vec<f64> {
    let n = x.len();
    let mut prefix = vec![0.0; n + 1];
    for (i, v) in x.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
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

/// Energy-weighted centre of the half-maximum lobe around `peak`.
fn lobe_centroid(e: &[f64], peak: usize, floor: f64) -> f64 {
    let half = floor + 0.5 * (e[peak] - floor);
    let mut lo = peak;
    while lo > 0 && e[lo - 1] >= half {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < e.len() && e[hi + 1] >= half {
        hi += 1;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (i, v) in e.iter().enumerate().take(hi + 1).skip(lo) {
        let w = v - floor;
        num += w * i as f64;
        den += w;
    }
    num / den
}

/// Locates the two vibrations of one cycle on its smoothed SST energy plot.
pub fn detect_vibrations(cycle: &[f64], sample_rate: f64, cfg: &FitConfig) -> Result<CycleTiming> {
    ensure_finite(cycle)?;
    if cycle.len() < 16 {
        return Err(Error::invalid(format!("cycle of {} samples is too short", cycle.len())));
    }
    let top = (sample_rate / MIN_SAMPLES_PER_OSCILLATION).min(25.0);
    let spec = sst(cycle, sample_rate, &WaveletConfig::log_band(5.0, top, 32), 32)?;
    let raw = energy_plot(&spec, 0).values;
    let half = ((0.01 * sample_rate).round() as usize).max(1);
    let e = moving_average(&raw, half);

    let floor = median(&e);
    let peak = (0..e.len()).max_by(|&a, &b| e[a].total_cmp(&e[b])).unwrap_or(0);
    if !(e[peak] > 0.0) || e[peak] < cfg.detection_ratio * floor {
        return Err(Error::NoVibration);
    }

    // The strongest lobe and the strongest one at least 0.1 s away from it.
    let gap = (0.1 * sample_rate).round() as usize;
    let second = crate::peaks::find_peaks(
        &e,
        &crate::peaks::PeakFilter {
            min_distance: 1,
            min_height: Some(floor + 0.1 * (e[peak] - floor)),
            min_prominence: Some(0.1 * (e[peak] - floor)),
        },
    )
    .into_iter()
    .filter(|&i| i.abs_diff(peak) >= gap)
    .max_by(|&a, &b| e[a].total_cmp(&e[b]).then(b.cmp(&a)));

    let time = |idx: f64| idx / sample_rate;
    let c1 = time(lobe_centroid(&e, peak, floor));
    Ok(match second {
        None => CycleTiming { t1: c1, t2: None },
        Some(s) => {
            let c2 = time(lobe_centroid(&e, s, floor));
            if c2 < c1 {
                CycleTiming { t1: c2, t2: Some(c1) }
            } else {
                CycleTiming { t1: c1, t2: Some(c2) }
            }
        }
    })
}

/// Scaling values and lag that put the R peak `lag` ahead of the first
/// vibration and the T peak `lag` ahead of the second, within a cycle of
/// length `ppi` starting at time zero.
pub fn timing_prior(timing: &CycleTiming, ppi: f64, lag: f64, opts: &PieceOptions) -> Result<(Vec<f64>, f64)> {
    let omega = 2.0 * PI / ppi;
    let len = opts.length as f64;
    let mut p = vec![0.0; N_SCALES];
    if let Some(t2) = timing.t2 {
        let d = OdeDefaults::peaks();
        let span = 2.0 * PI * (t2 - timing.t1) / ppi;
        let want = d[Wave::R.index()].angle + span;
        p[10 + Wave::T.index()] = ((want - d[Wave::T.index()].angle) / ANGLE_NUDGE).clamp(-1.0, 1.0);
    }
    let unshifted = generate_piece_with(&p, omega, 0.0, opts)?;
    let r0 = argmax(&unshifted) as f64;
    let r_target = (timing.t1 - lag) / ppi * len;
    let tau = ((r0 - r_target) / len).rem_euclid(1.0) * ppi;
    Ok((p, if tau >= ppi { 0.0 } else { tau }))
}

/// Maps one radar cycle of duration `ppi` to a normalized ECG piece whose R
/// peak leads the first vibration by `cfg.lag`.
pub fn fit_trace(cycle: &[f64], sample_rate: f64, ppi: f64, cfg: &FitConfig, seed: u64) -> Result<TraceFit> {
    cfg.validate()?;
    if !(ppi > 0.0 && ppi.is_finite()) {
        return Err(Error::invalid(format!("beat interval must be positive, got {ppi}")));
    }
    let timing = detect_vibrations(cycle, sample_rate, cfg)?;
    let omega = 2.0 * PI / ppi;
    let (p, tau) = timing_prior(&timing, ppi, cfg.lag, &cfg.piece)?;
    let template = generate_piece_with(&p, omega, tau, &cfg.piece)?;

    let fit = fit_piece_from(&template, cfg, seed, Some((&p, tau)), omega)?;
    Ok(TraceFit {
        r_index: argmax(&fit.piece),
        piece: fit.piece.clone(),
        timing,
        fit: FitReport::new(&fit, None),
    })
}

fn argmax(x: &[f64]) -> usize {
    (0..x.len()).max_by(|&a, &b| x[a].total_cmp(&x[b]).then(b.cmp(&a))).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecg_ode::generate_piece;
    use crate::signal_model::{synth_single_cycle, NoiseSpec, VibrationModel};

    fn quick() -> FitConfig {
        FitConfig {
            max_iterations: 300,
            restarts: 2,
            ..FitConfig::default()
        }
    }

    #[test]
    fn canonical_piece_is_recovered_exactly() {
        let target = generate_piece(&[0.0; 15], 2.0 * PI, 0.0).unwrap();
        let fit = fit_piece(&target, &FitConfig::default(), 1).unwrap();
        assert!(fit.residual <= 1e-3);
        assert!(fit.p.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn shifted_piece_finds_lag() {
        let target = generate_piece(&[0.0; 15], 2.0 * PI, 0.3).unwrap();
        let fit = fit_piece(&target, &quick(), 1).unwrap();
        assert!(fit.residual <= 1e-3, "{}", fit.residual);
    }

    #[test]
    fn constant_target_goes_flat() {
        let fit = fit_piece(&[0.5; 200], &quick(), 3).unwrap();
        assert!(fit.residual <= 0.01);
        assert!(fit.p[..5].iter().all(|v| *v == -1.0));
    }

    #[test]
    fn non_finite_target_rejected() {
        let mut t = vec![0.0; 200];
        t[7] = f64::NAN;
        assert!(fit_piece(&t, &quick(), 0).is_err());
    }

    #[test]
    fn same_seed_same_answer() {
        let mut p = [0.0; 15];
        p[2] = -0.3;
        p[7] = 0.4;
        let target = generate_piece(&p, 2.0 * PI, 0.0).unwrap();
        let a = fit_piece(&target, &quick(), 9).unwrap();
        let b = fit_piece(&target, &quick(), 9).unwrap();
        assert_eq!(a, b);
        assert!(a.history.windows(2).all(|w| w[1] <= w[0]));
    }

    fn cycle_model(noise: f64) -> VibrationModel {
        VibrationModel {
            noise: Some(NoiseSpec {
                white_std: noise,
                bursts: vec![],
                respiration: None,
            }),
            ..VibrationModel::default()
        }
    }

    #[test]
    fn r_peak_leads_first_vibration() {
        let vm = cycle_model(0.05);
        let ppi = 0.8;
        let x = synth_single_cycle(&vm, ppi, 200.0, 4).unwrap();
        let fit = fit_trace(&x, 200.0, ppi, &FitConfig::default(), 0).unwrap();
        let expect = (200.0 * (vm.t1 - 0.02) / ppi).round() as usize;
        assert!(fit.r_index.abs_diff(expect) <= 3, "{} vs {expect}", fit.r_index);
        assert!((fit.timing.t1 - vm.t1).abs() < 0.01);
        assert!((fit.timing.t2.unwrap() - vm.t2).abs() < 0.01);
    }

    #[test]
    fn noise_seed_does_not_move_r_peak() {
        let vm = cycle_model(0.05);
        let a = synth_single_cycle(&vm, 0.8, 200.0, 11).unwrap();
        let b = synth_single_cycle(&vm, 0.8, 200.0, 12).unwrap();
        assert_ne!(a, b);
        let fa = fit_trace(&a, 200.0, 0.8, &FitConfig::default(), 0).unwrap();
        let fb = fit_trace(&b, 200.0, 0.8, &FitConfig::default(), 0).unwrap();
        assert_eq!(fa.r_index, fb.r_index);
    }

    #[test]
    fn pure_noise_has_no_vibration() {
        let vm = VibrationModel {
            a1: 0.0,
            a2: 0.0,
            ..cycle_model(0.3)
        };
        let x = synth_single_cycle(&vm, 0.8, 200.0, 5).unwrap();
        let err = fit_trace(&x, 200.0, 0.8, &FitConfig::default(), 0).unwrap_err();
        assert_eq!(err.to_string(), "no vibration detected");
    }
}
