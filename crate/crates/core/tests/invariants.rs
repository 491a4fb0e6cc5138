use std::f64::consts::PI;

use radarode::ecg_ode::{generate_piece, integrate, AngleWrap, OdeParams, N_SCALES};
use radarode::pipeline::channel_energy;
use radarode::ppi::{estimate_ppi, Bandwidth, PpiConfig};
use radarode::signal_model::{synth_long_term, synth_single_cycle, LongTermSpec, VibrationModel};
use radarode::spectral::WaveletConfig;

fn first_pulse_only() -> VibrationModel {
    VibrationModel {
        a2: 0.0,
        ..VibrationModel::default()
    }
}

#[test]
fn pulse_envelope_is_even_about_its_center() {
    let vm = first_pulse_only();
    let fs = 2000.0;
    let v = synth_single_cycle(&vm, 1.0, fs, 0).unwrap();
    let c = (vm.t1 * fs).round() as usize;
    let carrier = |i: usize| (2.0 * PI * vm.f1 * i as f64 / fs).cos();
    let mut checked = 0;
    for d in 1..((4.0 * vm.b1 * fs) as usize).min(c) {
        let (ca, cb) = (carrier(c + d), carrier(c - d));
        if ca.abs() < 0.1 || cb.abs() < 0.1 {
            continue;
        }
        let (ea, eb) = (v[c + d] / ca, v[c - d] / cb);
        assert!((ea - eb).abs() <= 1e-12 * ea.abs().max(1e-300), "delta {d}: {ea} vs {eb}");
        checked += 1;
    }
    assert!(checked > 100);
}

#[test]
fn pulse_energy_stays_within_three_widths() {
    let fs = 5000.0;
    for (vm, center, width) in [
        (first_pulse_only(), 0.15, 0.04),
        (
            VibrationModel {
                a1: 0.0,
                ..VibrationModel::default()
            },
            0.45,
            0.03,
        ),
    ] {
        let v = synth_single_cycle(&vm, 1.0, fs, 0).unwrap();
        let total: f64 = v.iter().map(|x| x * x).sum();
        let near: f64 = v
            .iter()
            .enumerate()
            .filter(|(i, _)| (*i as f64 / fs - center).abs() <= 3.0 * width)
            .map(|(_, x)| x * x)
            .sum();
        assert!(near / total >= 0.99, "{}", near / total);
    }
}

#[test]
fn synthesis_is_a_function_of_the_seed() {
    let spec = LongTermSpec {
        ppi_schedule: vec![0.8; 12],
        channels: 6,
        seed: 17,
        ..LongTermSpec::default()
    };
    let vm = VibrationModel::default();
    let a = synth_long_term(&vm, &spec).unwrap();
    let b = synth_long_term(&vm, &spec).unwrap();
    assert_eq!(a.signal, b.signal);
    assert_eq!(a.truth, b.truth);
    let c = synth_long_term(&vm, &LongTermSpec { seed: 18, ..spec }).unwrap();
    assert_ne!(a.signal, c.signal);
}

#[test]
fn constant_schedule_gives_constant_ppi_series() {
    let spec = LongTermSpec {
        ppi_schedule: vec![0.85; 40],
        channels: 12,
        seed: 2,
        ..LongTermSpec::default()
    };
    let sig = synth_long_term(&VibrationModel::default(), &spec).unwrap().signal;
    let plots = channel_energy(&sig, &WaveletConfig::default(), 64).unwrap();
    let series = |bandwidth| -> Vec<f64> {
        let cfg = PpiConfig {
            bandwidth,
            ..PpiConfig::default()
        };
        estimate_ppi(&plots, &cfg).unwrap().segments.iter().map(|s| s.ppi).collect()
    };
    let narrow = series(Bandwidth::Fixed(0.02));
    assert!(narrow.len() >= 10);
    let lo = narrow.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = narrow.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(hi - lo <= PpiConfig::default().kde_grid, "{narrow:?}");
    assert!((lo - 0.85).abs() <= PpiConfig::default().kde_grid);
    // A bandwidth of n^(-1/5) seconds blends neighbouring candidate clusters.
    for p in series(Bandwidth::Verbatim) {
        assert!((p - 0.85).abs() <= 0.03, "{p}");
    }
}

// The -z relaxation runs on wall-clock time rather than phase, so the piece
// shape depends weakly on ω.
#[test]
fn piece_shape_depends_weakly_on_omega() {
    let base = generate_piece(&[0.0; N_SCALES], 2.0 * PI, 0.0).unwrap();
    let mut prev = 0.0;
    for ppi in [1.2, 1.5, 2.0] {
        let p = generate_piece(&[0.0; N_SCALES], 2.0 * PI / ppi, 0.0).unwrap();
        let d = p.iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d > prev && d <= 0.025, "ppi {ppi}: {d}");
        prev = d;
    }
    for ppi in [0.6, 0.8] {
        let p = generate_piece(&[0.0; N_SCALES], 2.0 * PI / ppi, 0.0).unwrap();
        let d = p.iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d <= 0.011, "ppi {ppi}: {d}");
    }
}

#[test]
fn cycles_contract_onto_the_limit_cycle() {
    for period in [0.8, 1.0, 1.25] {
        let eta = OdeParams::defaults(2.0 * PI / period).unwrap();
        let n = 4000;
        let z: Vec<f64> = integrate(&eta, n, 4, AngleWrap::Symmetric)
            .unwrap()
            .iter()
            .map(|s| s.z)
            .collect();
        let gap = |k: usize| (0..n).map(|i| (z[k * n + i] - z[(k + 1) * n + i]).abs()).fold(0.0, f64::max);
        assert!(gap(0) <= 0.04, "{}", gap(0));
        // The baseline transient decays as e^{-t}.
        for k in 1..3 {
            let ratio = gap(k) / gap(k - 1);
            assert!((ratio / (-period).exp() - 1.0).abs() < 0.05, "period {period}, cycle {k}: {ratio}");
        }
    }
}
