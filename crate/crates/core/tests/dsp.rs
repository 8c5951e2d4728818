mod support;

use avfuse_core::dsp::{hann_window, hz_to_mel, log_mel, resample, stft_power, AudioClip, LogMelConfig, LogMelExtractor};
use proptest::prelude::*;
use rand::Rng;
use support::oracles;

fn random_signal(seed: u64, n: usize) -> Vec<f32> {
    let mut r = support::rng(seed);
    (0..n).map(|_| r.gen_range(-1.0f32..1.0)).collect()
}

/// Largest `|a − b| / |b|` over bins, with bins below `1e-9` of the frame
/// peak compared on that floor instead.
fn frame_rel_err(got: &[f64], want: &[f64]) -> f64 {
    let peak = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    got.iter()
        .zip(want)
        .map(|(a, b)| (a - b).abs() / b.abs().max(peak * 1e-9))
        .fold(0.0, f64::max)
}

#[test]
fn stft_matches_dft_definition() {
    for (seed, (window, hop, n)) in [(400, 160, 1600), (256, 128, 1024), (64, 17, 300), (97, 31, 500), (8, 8, 64)]
        .into_iter()
        .enumerate()
    {
        let x = random_signal(seed as u64, n);
        let got = stft_power(&x, window, hop).unwrap();
        let want = oracles::stft_power(&x, window, hop);
        let frames = got.shape()[1];
        assert_eq!(got.shape()[0], window / 2 + 1);
        assert_eq!(frames, want.len());
        for (f, w) in want.iter().enumerate() {
            let col: Vec<f64> = (0..window / 2 + 1).map(|k| got.data()[k * frames + f] as f64).collect();
            let e = frame_rel_err(&col, w);
            assert!(e < 1e-5, "window {window} frame {f}: {e:e}");
        }
    }
}

#[test]
fn parseval_on_random_frames() {
    for seed in 0..20u64 {
        let n = [64, 128, 400, 255][seed as usize % 4];
        let x = random_signal(100 + seed, n);
        let p = stft_power(&x, n, n).unwrap();
        let bins: Vec<f64> = p.data().iter().map(|&v| v as f64).collect();
        // Mirror the one-sided spectrum: every bin other than DC and (for
        // even n) Nyquist appears twice in the full DFT.
        let full: f64 = bins
            .iter()
            .enumerate()
            .map(|(k, &v)| if k == 0 || (n % 2 == 0 && k == n / 2) { v } else { 2.0 * v })
            .sum();
        let w = oracles::hann(n);
        let energy: f64 = x.iter().zip(&w).map(|(&s, &w)| (s as f64 * w).powi(2)).sum();
        let rel = (full / n as f64 - energy).abs() / energy;
        assert!(rel < 1e-4, "n {n}: {rel:e}");
    }
}

#[test]
fn mel_scale_checkpoints() {
    assert!(hz_to_mel(0.0).abs() < 1e-6);
    let want = 2595.0 * 2f64.log10();
    assert!((hz_to_mel(700.0) - want).abs() < 1e-6);
    assert!((want - 781.17).abs() < 0.01);
}

#[test]
fn hann_sums_to_half_length() {
    for n in [2usize, 4, 16, 400, 1024] {
        let w = hann_window(n).unwrap();
        let s: f64 = w.data().iter().map(|&v| v as f64).sum();
        assert!((s - n as f64 / 2.0).abs() < 1e-4 * n as f64);
    }
    assert_eq!(hann_window(4).unwrap().data(), &[0.0, 0.5, 1.0, 0.5]);
}

#[test]
fn doubling_amplitude_adds_at_most_log_four() {
    let cfg = LogMelConfig {
        log_offset: 1e-12,
        ..LogMelConfig::default()
    };
    let ex = LogMelExtractor::new(cfg.clone()).unwrap();
    let x: Vec<f32> = random_signal(9, 16_000).iter().map(|v| v * 0.4).collect();
    let x2: Vec<f32> = x.iter().map(|v| v * 2.0).collect();
    let a = ex.extract(&AudioClip::new(x.clone(), 16_000).unwrap()).unwrap().values;
    let b = ex.extract(&AudioClip::new(x2, 16_000).unwrap()).unwrap().values;
    let energies = ex.mel_energies(&AudioClip::new(x, 16_000).unwrap()).unwrap();
    let l4 = 4f64.ln();
    for ((&a, &b), &e) in a.data().iter().zip(b.data()).zip(energies.data()) {
        let d = (b - a) as f64;
        assert!(d <= l4 + 1e-4, "{d}");
        if e as f64 > 1e-3 {
            assert!((d - l4).abs() < 1e-3, "{d} at energy {e}");
        }
    }
    // With the default offset the increase is strictly smaller.
    let ex = LogMelExtractor::new(LogMelConfig::default()).unwrap();
    let quiet: Vec<f32> = random_signal(3, 8000).iter().map(|v| v * 1e-3).collect();
    let loud: Vec<f32> = quiet.iter().map(|v| v * 2.0).collect();
    let a = ex.extract(&AudioClip::new(quiet, 16_000).unwrap()).unwrap().values;
    let b = ex.extract(&AudioClip::new(loud, 16_000).unwrap()).unwrap().values;
    assert!(a.data().iter().zip(b.data()).all(|(a, b)| ((b - a) as f64) < l4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn log_mel_is_finite(seed in 0u64..1000, n in 1usize..4000, rate in prop::sample::select(vec![8000u32, 16_000, 22_050, 44_100])) {
        let x = random_signal(seed, n);
        let lm = log_mel(&AudioClip::new(x, rate).unwrap(), &LogMelConfig::default()).unwrap();
        prop_assert!(lm.values.all_finite());
        prop_assert_eq!(lm.mel_bins(), 64);
    }

    #[test]
    fn resampling_keeps_constants(c in -1.0f32..1.0, n in 1usize..500, from in 4000u32..48_000, to in 4000u32..48_000) {
        let clip = resample(&AudioClip::new(vec![c; n], from).unwrap(), to).unwrap();
        prop_assert_eq!(clip.sample_rate(), to);
        prop_assert!(clip.samples().iter().all(|&v| v == c));
    }
}
