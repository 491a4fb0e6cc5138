use std::f64::consts::PI;

use proptest::prelude::*;

use radarode::ecg_ode::{generate_piece, scale_defaults, OdeDefaults, N_SCALES};
use radarode::link_budget::{max_range, min_detectable_power, received_power, LinkBudgetConfig};
use radarode::metrics::{mdr_with, pcc, peak_timing_error, rmse, MdrConfig};
use radarode::pipeline::concat_pieces;
use radarode::ppi::{kde_mode, Bandwidth};
use radarode::signal_model::{displacement_from_phase, phase_from_displacement, RadarConfig};
use radarode::spectral::{cwt, pse, sst, sst_detailed, stft, StftConfig, WaveletConfig};
use radarode::trace::{resample_periodic, EcgTrace, Wave};

fn series(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

fn pair(len: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    len.prop_flat_map(|n| (prop::collection::vec(-10.0f64..10.0, n), prop::collection::vec(-10.0f64..10.0, n)))
}

fn not_flat(x: &[f64]) -> bool {
    x.iter().any(|v| (v - x[0]).abs() > 1e-3)
}

fn link_config() -> impl Strategy<Value = LinkBudgetConfig> {
    (
        (-5.0f64..40.0, -5.0f64..40.0, -10.0f64..30.0, 1e-3f64..0.1),
        (-40.0f64..10.0, 1e6f64..1e10, 0.0f64..20.0, 0.0f64..20.0, 0.05f64..20.0),
    )
        .prop_map(|((tx_gain, rx_gain, tx_power, wavelength), (rcs, bandwidth, noise_figure, desired_snr, range))| {
            LinkBudgetConfig {
                tx_gain,
                rx_gain,
                tx_power,
                wavelength,
                rcs,
                bandwidth,
                noise_figure,
                desired_snr,
                range,
            }
        })
}

/// Unit spikes at `idx`, annotated as R peaks.
fn spikes(n: usize, rate: f64, idx: &[usize]) -> EcgTrace {
    let mut x = vec![0.0; n];
    for &i in idx {
        x[i] = 1.0;
    }
    EcgTrace::new(x, rate).unwrap().with_peaks(Wave::R, idx.to_vec()).unwrap()
}

fn sorted_unique(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rmse_and_pcc_are_symmetric((a, b) in pair(2..200)) {
        prop_assert_eq!(rmse(&a, &b).unwrap(), rmse(&b, &a).unwrap());
        prop_assume!(not_flat(&a) && not_flat(&b));
        prop_assert!((pcc(&a, &b).unwrap() - pcc(&b, &a).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn pcc_ignores_positive_affine_maps((a, b) in pair(3..200), scale in 0.01f64..100.0, offset in -50.0f64..50.0) {
        prop_assume!(not_flat(&a) && not_flat(&b));
        let mapped: Vec<f64> = a.iter().map(|v| scale * v + offset).collect();
        prop_assert!((pcc(&mapped, &b).unwrap() - pcc(&a, &b).unwrap()).abs() <= 1e-12);
        prop_assert!((pcc(&b, &mapped).unwrap() - pcc(&b, &a).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn rmse_of_self_is_zero(a in series(1..200)) {
        prop_assert_eq!(rmse(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn widening_match_tolerance_never_adds_misses(
        truth in prop::collection::vec(40usize..1960, 1..12),
        recon in prop::collection::vec(40usize..1960, 0..14),
        tol in 0.01f64..0.3,
        extra in 0.0f64..0.3,
    ) {
        let (truth, recon) = (sorted_unique(truth), sorted_unique(recon));
        let t = spikes(2000, 200.0, &truth);
        let r = spikes(2000, 200.0, &recon);
        let narrow = MdrConfig { match_tolerance: tol, ..MdrConfig::default() };
        let wide = MdrConfig { match_tolerance: tol + extra, ..MdrConfig::default() };
        prop_assert!(mdr_with(&r, &t, &wide).unwrap().missed <= mdr_with(&r, &t, &narrow).unwrap().missed);
    }

    #[test]
    fn uniform_shift_gives_constant_timing_error(shift in 1usize..20, beats in 2usize..6) {
        let piece = generate_piece(&[0.0; N_SCALES], 2.0 * PI, 0.3).unwrap();
        let tiled: Vec<f64> = piece.iter().cycle().take(beats * 200).copied().collect();
        let truth = radarode::metrics::delineate(
            &EcgTrace::new(tiled.clone(), 200.0).unwrap(),
            &(0..beats).map(|k| 200 * k + piece.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0).collect::<Vec<_>>(),
        ).unwrap();
        let mut moved = vec![tiled[0]; shift];
        moved.extend_from_slice(&tiled[..tiled.len() - shift]);
        let recon = EcgTrace::new(moved, 200.0).unwrap();
        let recon = radarode::metrics::delineate(&recon, &radarode::metrics::detect_r_peaks(&recon)).unwrap();
        let e = peak_timing_error(&recon, &truth, &[Wave::Q, Wave::R, Wave::S, Wave::T]).unwrap();
        let want = shift as f64 / 200.0;
        for (w, errs) in &e.errors {
            prop_assert!(!errs.is_empty(), "{} has no matched beats", w);
            for v in errs {
                prop_assert!((v - want).abs() < 1e-9, "{}: {} vs {}", w, v, want);
            }
        }
    }

    #[test]
    fn link_budget_closure(cfg in link_config()) {
        let at = LinkBudgetConfig { range: max_range(&cfg), ..cfg };
        prop_assert!((received_power(&at) - min_detectable_power(&cfg)).abs() <= 1e-9);
    }

    #[test]
    fn max_range_monotone(cfg in link_config(), d in 0.1f64..10.0) {
        let r = max_range(&cfg);
        for up in [
            LinkBudgetConfig { tx_power: cfg.tx_power + d, ..cfg },
            LinkBudgetConfig { tx_gain: cfg.tx_gain + d, ..cfg },
            LinkBudgetConfig { rx_gain: cfg.rx_gain + d, ..cfg },
            LinkBudgetConfig { rcs: cfg.rcs + d, ..cfg },
        ] {
            prop_assert!(max_range(&up) > r);
        }
        for down in [
            LinkBudgetConfig { noise_figure: cfg.noise_figure + d, ..cfg },
            LinkBudgetConfig { desired_snr: cfg.desired_snr + d, ..cfg },
            LinkBudgetConfig { bandwidth: cfg.bandwidth * (1.0 + d), ..cfg },
        ] {
            prop_assert!(max_range(&down) < r);
        }
    }

    #[test]
    fn kde_mode_ignores_order(mut c in prop::collection::vec(0.3f64..2.0, 1..60), seed in any::<u64>()) {
        let a = kde_mode(&c, 1e-3, Bandwidth::Verbatim).unwrap().mode;
        let n = c.len();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            c.swap(i, (s >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(a, kde_mode(&c, 1e-3, Bandwidth::Verbatim).unwrap().mode);
    }

    #[test]
    fn duplicating_the_mode_barely_moves_it(c in prop::collection::vec(0.3f64..2.0, 1..60), h in 0.01f64..0.5) {
        let before = kde_mode(&c, 1e-3, Bandwidth::Fixed(h)).unwrap().mode;
        let mut more = c.clone();
        more.push(before);
        let after = kde_mode(&more, 1e-3, Bandwidth::Fixed(h)).unwrap().mode;
        prop_assert!((after - before).abs() <= 1e-3 + 1e-9, "{} -> {}", before, after);
    }

    #[test]
    fn mode_beats_mean_for_far_outliers(truth in 0.5f64..0.9, m in 10usize..60, frac in 0.0f64..0.49, side in any::<bool>()) {
        let k = ((m as f64 * frac) as usize).max(1);
        prop_assume!(k * 2 < m);
        let h = ((m + k) as f64).powf(-0.2);
        let outlier = if side { truth + 6.0 * h + 0.01 } else { truth - 6.0 * h - 0.01 };
        let mut c = vec![truth; m];
        c.extend(std::iter::repeat_n(outlier, k));
        let mode = kde_mode(&c, 1e-3, Bandwidth::Verbatim).unwrap().mode;
        let mean = c.iter().sum::<f64>() / c.len() as f64;
        prop_assert!((mode - truth).abs() < (mean - truth).abs());
    }

    #[test]
    fn phase_round_trip_and_linearity(x in series(1..100), alpha in -5.0f64..5.0) {
        let cfg = RadarConfig::from_wavelength(3.9e-3, 0.45).unwrap();
        let phi = phase_from_displacement(&x, &cfg).unwrap();
        let back = displacement_from_phase(&phi, &cfg).unwrap();
        for (a, b) in x.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
        let scaled: Vec<f64> = x.iter().map(|v| alpha * v).collect();
        let phi_s = phase_from_displacement(&scaled, &cfg).unwrap();
        for (a, b) in phi_s.iter().zip(&phi) {
            prop_assert!((a - alpha * b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
    }

    #[test]
    fn concatenated_length_is_sum_of_rounded_intervals(ppi in prop::collection::vec(0.3f64..2.0, 1..8), rate in 50.0f64..500.0) {
        let pieces = vec![vec![0.5; 200]; ppi.len()];
        let t = concat_pieces(&pieces, &ppi, rate).unwrap();
        let want: usize = ppi.iter().map(|p| (p * rate).round() as usize).sum();
        prop_assert_eq!(t.len(), want);
        prop_assert!((t.duration() - ppi.iter().sum::<f64>()).abs() <= ppi.len() as f64 / rate);
    }

    #[test]
    fn periodic_resampling_round_trips(ppi in 0.6f64..1.5, k in 1usize..5, tau in 0.0f64..0.99) {
        // Rates that make every beat an integer multiple of the piece length.
        let piece = generate_piece(&[0.0; N_SCALES], 2.0 * PI, tau).unwrap();
        let t = concat_pieces(std::slice::from_ref(&piece), &[ppi], 200.0 * k as f64 / ppi).unwrap();
        prop_assert_eq!(t.len(), 200 * k);
        let back = resample_periodic(&t.samples, 200);
        let err = piece.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-9, "{}", err);
    }

    #[test]
    fn zero_scaling_is_identity_and_amplitude_scales(k in 0usize..5, p in -1.0f64..1.0) {
        let mut v = [0.0; N_SCALES];
        v[k] = p;
        let peaks = scale_defaults(&v).unwrap();
        prop_assert!((peaks[k].amplitude - OdeDefaults::AMPLITUDES[k] * (1.0 + p)).abs() <= 1e-12);
        for (j, pk) in peaks.iter().enumerate() {
            if j != k {
                prop_assert_eq!(pk.amplitude, OdeDefaults::AMPLITUDES[j]);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sst_moves_energy_without_creating_it(x in series(300..900)) {
        let out = sst_detailed(&x, 200.0, &WaveletConfig::default(), 64).unwrap();
        prop_assume!(out.included_power > 0.0);
        let total = out.spectrogram.total_power();
        prop_assert!((total - out.included_power).abs() <= 1e-6 * out.included_power);
        prop_assert!(out.included_power <= out.cwt_power * (1.0 + 1e-12));
    }

    #[test]
    fn pse_is_bounded(x in series(300..900)) {
        prop_assume!(not_flat(&x));
        let cfg = WaveletConfig::default();
        for s in [sst(&x, 200.0, &cfg, 64).unwrap(), cwt(&x, 200.0, &cfg).unwrap(), stft(&x, 200.0, &StftConfig::default()).unwrap()] {
            let h = pse(&s).unwrap();
            prop_assert!((0.0..=1.0).contains(&h));
        }
    }

    #[test]
    fn spectrograms_follow_time_shifts(x in series(1200..1400), k in 1usize..4) {
        // Shift by whole STFT hops so every method sees an exact column shift.
        let cfg = WaveletConfig::default();
        let hop = StftConfig::default().hop;
        let shift = k * hop;
        let mut moved = vec![0.0; shift];
        moved.extend_from_slice(&x);
        let fs = 200.0;
        // Interior: away from both ends by the widest wavelet support.
        let edge = (5.0 * cfg.scales.last().unwrap() * fs).ceil() as usize;
        let check = |a: &radarode::spectral::Spectrogram, b: &radarode::spectral::Spectrogram, cols: std::ops::Range<usize>, offset: usize| {
            let mut worst = 0.0f64;
            let mut scale = 0.0f64;
            for r in 0..a.rows() {
                for j in cols.clone() {
                    worst = worst.max((a.get(r, j) - b.get(r, j + offset)).abs());
                    scale = scale.max(a.get(r, j));
                }
            }
            worst <= 1e-6 * scale
        };
        let n = x.len();
        prop_assert!(check(&cwt(&x, fs, &cfg).unwrap(), &cwt(&moved, fs, &cfg).unwrap(), edge..n - edge, shift));
        prop_assert!(check(&sst(&x, fs, &cfg, 64).unwrap(), &sst(&moved, fs, &cfg, 64).unwrap(), edge..n - edge, shift));
        let a = stft(&x, fs, &StftConfig::default()).unwrap();
        let b = stft(&moved, fs, &StftConfig::default()).unwrap();
        prop_assert!(check(&a, &b, 0..a.cols(), k));
    }
}
