//! Radar phase/displacement relation and a synthetic chest-vibration generator.
//!
//! Each cardiac cycle carries two Gaussian-windowed oscillations
//! `v_k(t) = a_k cos(2π f_k t) exp(-(t - T_k)² / b_k²)`, the first near the
//! QRS complex and the second near the T wave. Long recordings are tiled from
//! cycles following a peak-to-peak interval (PPI) schedule, one seeded random
//! stream per channel.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Speed of light in vacuum, m/s.
pub const LIGHT_SPEED: f64 = 299_792_458.0;

/// Physiological PPI bounds in seconds.
pub const PPI_MIN: f64 = 0.3;
pub const PPI_MAX: f64 = 2.0;

/// Pulses are evaluated out to this many widths from their center.
const PULSE_SUPPORT: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarConfig {
    pub carrier_frequency: f64,
    pub nominal_distance: f64,
}

impl RadarConfig {
    pub fn new(carrier_frequency: f64, nominal_distance: f64) -> Result<Self> {
        let cfg = RadarConfig {
            carrier_frequency,
            nominal_distance,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Build from a wavelength instead of a carrier frequency.
    pub fn from_wavelength(wavelength: f64, nominal_distance: f64) -> Result<Self> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::invalid(format!("wavelength must be positive, got {wavelength}")));
        }
        Self::new(LIGHT_SPEED / wavelength, nominal_distance)
    }

    pub fn wavelength(&self) -> f64 {
        LIGHT_SPEED / self.carrier_frequency
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_frequency > 0.0 && self.carrier_frequency.is_finite()) {
            return Err(Error::invalid(format!(
                "carrier frequency must be positive, got {}",
                self.carrier_frequency
            )));
        }
        if !(self.nominal_distance > 0.0 && self.nominal_distance.is_finite()) {
            return Err(Error::invalid(format!(
                "nominal distance must be positive, got {}",
                self.nominal_distance
            )));
        }
        Ok(())
    }
}

impl Default for RadarConfig {
    /// 3.9 mm wavelength at 0.45 m.
    fn default() -> Self {
        RadarConfig {
            carrier_frequency: LIGHT_SPEED / 3.9e-3,
            nominal_distance: 0.45,
        }
    }
}

/// Phase variation `4π x / λ` induced by chest displacement `x` (meters).
pub fn phase_from_displacement(x: &[f64], cfg: &RadarConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    ensure_finite(x)?;
    let k = 4.0 * PI / cfg.wavelength();
    Ok(x.iter().map(|v| k * v).collect())
}

/// Inverse of [`phase_from_displacement`].
pub fn displacement_from_phase(phi: &[f64], cfg: &RadarConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    ensure_finite(phi)?;
    let k = cfg.wavelength() / (4.0 * PI);
    Ok(phi.iter().map(|v| k * v).collect())
}

/// Rectangular window of large-amplitude noise emulating a body movement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Burst {
    pub start: f64,
    pub duration: f64,
    /// Noise standard deviation as a multiple of `a1`.
    pub amplitude_ratio: f64,
}

impl Burst {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.start + self.duration
    }
}

/// Low-frequency sinusoid injected only for robustness experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Respiration {
    pub amplitude: f64,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// White Gaussian noise standard deviation, meters.
    pub white_std: f64,
    pub bursts: Vec<Burst>,
    pub respiration: Option<Respiration>,
}

/// Two-pulse vibration model of one cardiac cycle.
///
/// `t1`/`t2` are pulse centers in seconds from the cycle start. Long-term
/// synthesis treats them as positions within a 1 s reference cycle and scales
/// them with each cycle's PPI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VibrationModel {
    pub a1: f64,
    pub b1: f64,
    pub f1: f64,
    pub t1: f64,
    pub a2: f64,
    pub b2: f64,
    pub f2: f64,
    pub t2: f64,
    pub noise: Option<NoiseSpec>,
}

impl Default for VibrationModel {
    fn default() -> Self {
        VibrationModel {
            a1: 1.0,
            b1: 0.04,
            f1: 18.0,
            t1: 0.15,
            a2: 0.5,
            b2: 0.03,
            f2: 22.0,
            t2: 0.45,
            noise: None,
        }
    }
}

impl VibrationModel {
    pub fn validate(&self) -> Result<()> {
        let all = [self.a1, self.b1, self.f1, self.t1, self.a2, self.b2, self.f2, self.t2];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("vibration model has non-finite fields"));
        }
        if self.b1 <= 0.0 || self.b2 <= 0.0 {
            return Err(Error::invalid("pulse widths b1, b2 must be positive"));
        }
        if self.f1 < 0.0 || self.f2 < 0.0 {
            return Err(Error::invalid("pulse frequencies must be non-negative"));
        }
        if self.t1 >= self.t2 {
            return Err(Error::invalid(format!(
                "first pulse must precede the second (t1={}, t2={})",
                self.t1, self.t2
            )));
        }
        Ok(())
    }

    /// Highest pulse frequency, used for the sampling-adequacy check.
    pub fn max_frequency(&self) -> f64 {
        self.f1.max(self.f2)
    }
}

/// Gaussian-windowed cosine with the carrier phase referenced to `origin`.
#[derive(Debug, Clone, Copy)]
struct Pulse {
    amplitude: f64,
    width: f64,
    frequency: f64,
    center: f64,
    origin: f64,
}

impl Pulse {
    fn envelope(&self, t: f64) -> f64 {
        let d = (t - self.center) / self.width;
        (-d * d).exp()
    }

    fn value(&self, t: f64) -> f64 {
        self.amplitude * (2.0 * PI * self.frequency * (t - self.origin)).cos() * self.envelope(t)
    }

    /// Accumulate into `out`, sampled at `i / fs` (plus `t0`).
    fn add_to(&self, out: &mut [f64], fs: f64, t0: f64) {
        if self.amplitude == 0.0 || out.is_empty() {
            return;
        }
        let reach = PULSE_SUPPORT * self.width;
        let lo = (((self.center - reach - t0) * fs).floor().max(0.0)) as usize;
        let hi = (((self.center + reach - t0) * fs).ceil().max(0.0) as usize).min(out.len() - 1);
        for (i, slot) in out.iter_mut().enumerate().take(hi + 1).skip(lo) {
            *slot += self.value(t0 + i as f64 / fs);
        }
    }
}

fn check_sampling(vm: &VibrationModel, sample_rate: f64) -> Result<()> {
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(Error::invalid(format!("sample rate must be positive, got {sample_rate}")));
    }
    let needed = 4.0 * vm.max_frequency();
    if sample_rate < needed {
        return Err(Error::invalid(format!(
            "sample rate {sample_rate} Hz is below 4x the highest pulse frequency ({needed} Hz)"
        )));
    }
    Ok(())
}

fn add_white(out: &mut [f64], std: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    if std <= 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, std).map_err(|e| Error::invalid(e.to_string()))?;
    for v in out.iter_mut() {
        *v += normal.sample(rng);
    }
    Ok(())
}

fn add_bursts(out: &mut [f64], fs: f64, a1: f64, bursts: &[Burst], rng: &mut ChaCha8Rng) -> Result<()> {
    for burst in bursts {
        let std = burst.amplitude_ratio * a1.abs();
        if std <= 0.0 {
            continue;
        }
        let normal = Normal::new(0.0, std).map_err(|e| Error::invalid(e.to_string()))?;
        for (i, v) in out.iter_mut().enumerate() {
            if burst.contains(i as f64 / fs) {
                *v += normal.sample(rng);
            }
        }
    }
    Ok(())
}

fn add_respiration(out: &mut [f64], fs: f64, resp: &Respiration) {
    for (i, v) in out.iter_mut().enumerate() {
        *v += resp.amplitude * (2.0 * PI * resp.frequency * i as f64 / fs).sin();
    }
}

/// One cycle of `v1 + v2 + noise`, sampled on `round(duration * fs)` points.
pub fn synth_single_cycle(
    vm: &VibrationModel,
    duration: f64,
    sample_rate: f64,
    rng_seed: u64,
) -> Result<Vec<f64>> {
    vm.validate()?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::invalid(format!("duration must be positive, got {duration}")));
    }
    check_sampling(vm, sample_rate)?;
    let n = (duration * sample_rate).round() as usize;
    let mut out = vec![0.0; n];
    for pulse in [
        Pulse {
            amplitude: vm.a1,
            width: vm.b1,
            frequency: vm.f1,
            center: vm.t1,
            origin: 0.0,
        },
        Pulse {
            amplitude: vm.a2,
            width: vm.b2,
            frequency: vm.f2,
            center: vm.t2,
            origin: 0.0,
        },
    ] {
        pulse.add_to(&mut out, sample_rate, 0.0);
    }
    if let Some(noise) = &vm.noise {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        add_white(&mut out, noise.white_std, &mut rng)?;
        add_bursts(&mut out, sample_rate, vm.a1, &noise.bursts, &mut rng)?;
        if let Some(resp) = &noise.respiration {
            add_respiration(&mut out, sample_rate, resp);
        }
    }
    Ok(out)
}

/// Synchronized channels sharing one sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelSignal {
    pub sample_rate: f64,
    pub start_time: f64,
    pub data: Vec<Vec<f64>>,
}

impl MultiChannelSignal {
    pub fn new(sample_rate: f64, start_time: f64, data: Vec<Vec<f64>>) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::invalid(format!("sample rate must be positive, got {sample_rate}")));
        }
        if data.is_empty() {
            return Err(Error::invalid("signal needs at least one channel"));
        }
        let len = data[0].len();
        if let Some(c) = data.iter().position(|ch| ch.len() != len) {
            return Err(Error::invalid(format!(
                "channel {c} has {} samples, expected {len}",
                data[c].len()
            )));
        }
        Ok(MultiChannelSignal {
            sample_rate,
            start_time,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.data.len()
    }

    pub fn len(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start_time + i as f64 / self.sample_rate
    }
}

/// Truth record for one synthesized cycle. All times are absolute seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleTruth {
    pub start: f64,
    #[serde(rename = "T1")]
    pub t1: f64,
    #[serde(rename = "T2")]
    pub t2: f64,
}

/// Ground-truth sidecar written next to synthesized recordings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub ppi: Vec<f64>,
    pub cycles: Vec<CycleTruth>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LongTermSpec {
    pub ppi_schedule: Vec<f64>,
    pub channels: usize,
    /// Per-cycle amplitude perturbation (fraction of `a_k`) and timing
    /// perturbation (fraction of `b_k`), drawn uniformly in `[-j, j]`.
    pub channel_jitter: f64,
    pub sample_rate: f64,
    /// Channels replaced by pure white noise.
    pub corrupted_channels: Vec<usize>,
    pub corruption_std: f64,
    pub seed: u64,
}

impl Default for LongTermSpec {
    fn default() -> Self {
        LongTermSpec {
            ppi_schedule: vec![0.8; 75],
            channels: 50,
            channel_jitter: 0.05,
            sample_rate: 200.0,
            corrupted_channels: Vec::new(),
            corruption_std: 0.3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongTermSynthesis {
    pub signal: MultiChannelSignal,
    pub truth: GroundTruth,
}

/// Reproducible per-channel random stream.
pub(crate) fn channel_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sample index where each cycle starts, and the total sample count.
fn cycle_layout(ppi: &[f64], fs: f64) -> (Vec<f64>, usize) {
    let mut starts = Vec::with_capacity(ppi.len());
    let mut t = 0.0;
    for p in ppi {
        starts.push(t);
        t += p;
    }
    (starts, (t * fs).round() as usize)
}

/// Tile cycles of `vm` following `spec.ppi_schedule` over `spec.channels` channels.
pub fn synth_long_term(vm: &VibrationModel, spec: &LongTermSpec) -> Result<LongTermSynthesis> {
    vm.validate()?;
    check_sampling(vm, spec.sample_rate)?;
    if spec.channels == 0 {
        return Err(Error::invalid("need at least one channel"));
    }
    if spec.ppi_schedule.is_empty() {
        return Err(Error::invalid("PPI schedule is empty"));
    }
    if let Some(p) = spec
        .ppi_schedule
        .iter()
        .find(|p| !(PPI_MIN..=PPI_MAX).contains(*p))
    {
        return Err(Error::invalid(format!(
            "PPI {p} s outside physiological bounds [{PPI_MIN}, {PPI_MAX}]"
        )));
    }
    if !(spec.channel_jitter >= 0.0 && spec.channel_jitter < 1.0) {
        return Err(Error::invalid("channel jitter must lie in [0, 1)"));
    }
    if let Some(c) = spec.corrupted_channels.iter().find(|c| **c >= spec.channels) {
        return Err(Error::invalid(format!("corrupted channel {c} out of range")));
    }

    let fs = spec.sample_rate;
    let (starts, n) = cycle_layout(&spec.ppi_schedule, fs);
    let cycles: Vec<CycleTruth> = starts
        .iter()
        .zip(&spec.ppi_schedule)
        .map(|(&start, &ppi)| CycleTruth {
            start,
            t1: start + vm.t1 * ppi,
            t2: start + vm.t2 * ppi,
        })
        .collect();

    // Body movement hits every channel identically.
    let mut common = vec![0.0; n];
    if let Some(noise) = &vm.noise {
        let mut rng = channel_rng(spec.seed, u64::MAX);
        add_bursts(&mut common, fs, vm.a1, &noise.bursts, &mut rng)?;
        if let Some(resp) = &noise.respiration {
            add_respiration(&mut common, fs, resp);
        }
    }

    let jitter = spec.channel_jitter;
    let mut data = Vec::with_capacity(spec.channels);
    for ch in 0..spec.channels {
        let mut rng = channel_rng(spec.seed, ch as u64);
        if spec.corrupted_channels.contains(&ch) {
            let mut x = vec![0.0; n];
            add_white(&mut x, spec.corruption_std, &mut rng)?;
            data.push(x);
            continue;
        }
        let mut x = common.clone();
        for (cyc, &ppi) in cycles.iter().zip(&spec.ppi_schedule) {
            for (a, b, f, t) in [(vm.a1, vm.b1, vm.f1, vm.t1), (vm.a2, vm.b2, vm.f2, vm.t2)] {
                let (da, dt) = if jitter > 0.0 {
                    (rng.random_range(-jitter..=jitter), rng.random_range(-jitter..=jitter))
                } else {
                    (0.0, 0.0)
                };
                Pulse {
                    amplitude: a * (1.0 + da),
                    width: b,
                    frequency: f,
                    center: cyc.start + t * ppi + dt * b,
                    origin: cyc.start,
                }
                .add_to(&mut x, fs, 0.0);
            }
        }
        if let Some(noise) = &vm.noise {
            add_white(&mut x, noise.white_std, &mut rng)?;
        }
        data.push(x);
    }

    Ok(LongTermSynthesis {
        signal: MultiChannelSignal::new(fs, 0.0, data)?,
        truth: GroundTruth {
            ppi: spec.ppi_schedule.clone(),
            cycles,
            seed: spec.seed,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_v_radar() -> RadarConfig {
        RadarConfig::from_wavelength(3.9e-3, 0.45).unwrap()
    }

    #[test]
    fn wavelength_matches_carrier() {
        let cfg = RadarConfig::new(77e9, 0.5).unwrap();
        let rel = (cfg.wavelength() - LIGHT_SPEED / 77e9).abs() / cfg.wavelength();
        assert!(rel < 1e-12);
        assert!(RadarConfig::new(77e9, 0.0).is_err());
        assert!(RadarConfig::new(-1.0, 0.5).is_err());
    }

    #[test]
    fn zero_and_quarter_wavelength_phase() {
        let cfg = table_v_radar();
        assert!(phase_from_displacement(&[0.0; 4], &cfg)
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
        let quarter = vec![cfg.wavelength() / 4.0; 3];
        for v in phase_from_displacement(&quarter, &cfg).unwrap() {
            assert!((v - PI).abs() < 1e-12);
        }
        for v in displacement_from_phase(&[PI], &cfg).unwrap() {
            assert!((v - cfg.wavelength() / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn phase_of_tenth_millimeter() {
        // 4π · 1e-4 / 3.9e-3
        let expected = 0.322_214_631_137_417_4;
        let phi = phase_from_displacement(&[1e-4], &table_v_radar()).unwrap();
        assert!((phi[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn non_finite_displacement_reports_index() {
        let err = phase_from_displacement(&[0.0, 1.0, f64::NAN], &table_v_radar()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 2 }));
    }

    #[test]
    fn single_pulse_peaks_at_center() {
        let vm = VibrationModel {
            a1: 1.0,
            b1: 0.05,
            f1: 20.0,
            t1: 0.1,
            a2: 0.0,
            ..Default::default()
        };
        let x = synth_single_cycle(&vm, 1.0, 1000.0, 0).unwrap();
        assert!((x[100] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn silent_model_is_zero() {
        let vm = VibrationModel {
            a1: 0.0,
            a2: 0.0,
            ..Default::default()
        };
        assert!(synth_single_cycle(&vm, 1.0, 200.0, 1)
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn tails_vanish_far_from_pulses() {
        let vm = VibrationModel {
            a1: 1.0,
            b1: 0.04,
            f1: 18.0,
            t1: 0.10,
            a2: 0.5,
            b2: 0.03,
            f2: 22.0,
            t2: 0.35,
            noise: None,
        };
        let fs = 1000.0;
        let x = synth_single_cycle(&vm, 1.0, fs, 0).unwrap();
        for (i, v) in x.iter().enumerate() {
            let t = i as f64 / fs;
            if (t - 0.10).abs() > 5.0 * 0.04 && (t - 0.35).abs() > 5.0 * 0.03 {
                assert!(v.abs() < 1e-6, "t={t} v={v}");
            }
        }
    }

    #[test]
    fn rejects_undersampling_and_bad_order() {
        let vm = VibrationModel::default();
        assert!(synth_single_cycle(&vm, 1.0, 80.0, 0).is_err());
        let swapped = VibrationModel {
            t1: 0.5,
            t2: 0.2,
            ..Default::default()
        };
        assert!(synth_single_cycle(&swapped, 1.0, 200.0, 0).is_err());
    }

    #[test]
    fn constant_schedule_gives_identical_cycles() {
        let spec = LongTermSpec {
            ppi_schedule: vec![1.0; 10],
            channels: 1,
            channel_jitter: 0.0,
            sample_rate: 200.0,
            ..Default::default()
        };
        let out = synth_long_term(&VibrationModel::default(), &spec).unwrap();
        assert_eq!(out.signal.len(), 2000);
        assert!((out.signal.duration() - 10.0).abs() < 1e-12);
        let x = &out.signal.data[0];
        // neighbouring cycles only touch through Gaussian tails below 1e-6
        for k in 1..10 {
            for i in 0..200 {
                assert!((x[k * 200 + i] - x[i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn truth_ppi_equals_schedule() {
        let spec = LongTermSpec {
            ppi_schedule: vec![0.8; 12],
            channels: 2,
            channel_jitter: 0.0,
            ..Default::default()
        };
        let out = synth_long_term(&VibrationModel::default(), &spec).unwrap();
        assert_eq!(out.truth.ppi, spec.ppi_schedule);
        let starts: Vec<f64> = out.truth.cycles.iter().map(|c| c.start).collect();
        for w in starts.windows(2) {
            assert!((w[1] - w[0] - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_unphysiological_ppi() {
        let spec = LongTermSpec {
            ppi_schedule: vec![0.8, 2.5],
            ..Default::default()
        };
        assert!(synth_long_term(&VibrationModel::default(), &spec).is_err());
    }

    #[test]
    fn sidecar_field_names() {
        let truth = GroundTruth {
            ppi: vec![1.0],
            cycles: vec![CycleTruth {
                start: 0.0,
                t1: 0.15,
                t2: 0.45,
            }],
            seed: 7,
        };
        let json = serde_json::to_string(&truth).unwrap();
        assert_eq!(
            json,
            r#"{"ppi":[1.0],"cycles":[{"start":0.0,"T1":0.15,"T2":0.45}],"seed":7}"#
        );
    }
}
