mod support;

use avfuse_core::pipeline::{Split, CLASS_NAMES};
use avfuse_core::synth::{add_noise, darken, generate, plan, render, SynthConfig, DARK_SCALE};
use avfuse_core::Tensor;
use support::oracles::dft_power;

fn short() -> SynthConfig {
    SynthConfig {
        clips_per_class: 4,
        clip_len: 12,
        duration_s: 0.25,
        tone_duration_s: 0.1,
        ..SynthConfig::default()
    }
}

#[test]
fn tone_is_the_spectral_peak() {
    let cfg = short();
    let clips = generate(&cfg).unwrap();
    let n = (cfg.duration_s * cfg.sample_rate as f64).round() as usize;
    let bin_hz = cfg.sample_rate as f64 / n as f64;
    let mut checked = 0;
    for c in clips.iter().filter(|c| c.plan.index % cfg.clips_per_class < 2) {
        let Some(f) = cfg.tone_hz(c.plan.label) else { continue };
        let x: Vec<f64> = c.audio.iter().map(|&v| v as f64).collect();
        let p = dft_power(&x);
        let peak = (1..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        let want = f / bin_hz;
        assert!((peak as f64 - want).abs() <= 1.0, "{}: peak bin {peak}, tone bin {want}", c.plan.id);
        checked += 1;
    }
    assert_eq!(checked, 2 * cfg.salient_labels().len());
}

#[test]
fn silent_classes_have_no_tone() {
    let cfg = short();
    for c in generate(&cfg).unwrap() {
        if cfg.tone_hz(c.plan.label).is_some() {
            continue;
        }
        let x: Vec<f64> = c.audio.iter().map(|&v| v as f64).collect();
        let p = dft_power(&x);
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        let peak = p.iter().cloned().fold(0.0, f64::max);
        // White noise: the largest of ~2000 χ² bins stays within ~15× the mean.
        assert!(peak < 25.0 * mean, "{} peak/mean {}", c.plan.id, peak / mean);
    }
}

fn frame_means(v: &Tensor<f32>) -> Vec<f64> {
    let s = v.shape();
    let (l, plane) = (s[1], s[2] * s[3]);
    (0..l)
        .map(|t| {
            let mut sum = 0.0;
            for c in 0..s[0] {
                let start = (c * l + t) * plane;
                sum += v.data()[start..start + plane].iter().map(|&x| x as f64).sum::<f64>();
            }
            sum / (s[0] * plane) as f64
        })
        .collect()
}

#[test]
fn darken_scales_frame_brightness() {
    let cfg = short();
    let clip = &generate(&cfg).unwrap()[0];
    let dark = darken(&clip.video, 1.0 - DARK_SCALE).unwrap();
    for (a, b) in frame_means(&clip.video).iter().zip(frame_means(&dark)) {
        assert!((b / a - DARK_SCALE).abs() < 1e-6, "{}", b / a);
    }
}

#[test]
fn dark_render_scales_the_clean_scene() {
    let cfg = SynthConfig {
        visual_noise: 0.0,
        ..short()
    };
    let mut p = plan(&cfg).unwrap()[5].clone();
    p.dark = false;
    let day = render(&cfg, &p);
    p.dark = true;
    let night = render(&cfg, &p);
    for (a, b) in frame_means(&day.video).iter().zip(frame_means(&night.video)) {
        assert!((b / a - DARK_SCALE).abs() < 1e-6);
    }
    assert_eq!(day.audio, night.audio, "audio is illumination-invariant");
}

/// SNR of `noisy` against `clean` after projecting out any global gain.
fn measured_snr_db(clean: &[f32], noisy: &[f32]) -> f64 {
    let dot = |a: &[f32], b: &[f32]| a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum::<f64>();
    let g = dot(noisy, clean) / dot(clean, clean);
    let signal: f64 = clean.iter().map(|&s| (g * s as f64).powi(2)).sum();
    let residual: f64 = clean
        .iter()
        .zip(noisy)
        .map(|(&s, &y)| (y as f64 - g * s as f64).powi(2))
        .sum();
    10.0 * (signal / residual).log10()
}

#[test]
fn audio_noise_hits_target_snr() {
    let cfg = SynthConfig {
        audio_noise: 0.0,
        duration_s: 1.0,
        tone_duration_s: 1.0,
        ..short()
    };
    let clips = generate(&cfg).unwrap();
    let tone = clips.iter().find(|c| cfg.tone_hz(c.plan.label).is_some()).unwrap();
    for (seed, snr_db) in [(0u64, 0.0f64), (1, 10.0), (2, -5.0), (3, 20.0)] {
        let magnitude = 10f64.powf(-snr_db / 10.0);
        let noisy = add_noise(&tone.audio, magnitude, &mut support::rng(seed)).unwrap();
        assert!(noisy.iter().all(|v| v.abs() <= 1.0));
        let got = measured_snr_db(&tone.audio, &noisy);
        assert!((got - snr_db).abs() < 1.0, "target {snr_db} dB, measured {got:.2} dB");
    }
}

/// Summary of the time-averaged frame: total brightness, peak and spread.
fn mean_frame_features(v: &Tensor<f32>) -> [f64; 3] {
    let s = v.shape();
    let (l, plane) = (s[1], s[2] * s[3]);
    let mut mean = vec![0.0f64; plane];
    for t in 0..l {
        for (i, m) in mean.iter_mut().enumerate() {
            *m += v.data()[t * plane + i] as f64 / l as f64;
        }
    }
    let total: f64 = mean.iter().sum();
    let peak = mean.iter().cloned().fold(0.0, f64::max);
    let mu = total / plane as f64;
    let spread = (mean.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / plane as f64).sqrt();
    [total / plane as f64, peak, spread]
}

#[test]
fn visually_distinct_classes_beat_chance_with_nearest_centroid() {
    let cfg = SynthConfig {
        clips_per_class: 20,
        ..short()
    };
    // One class per motion pattern and blob count.
    let classes = ["run", "chase", "fight", "normal1", "normal2"];
    let labels: Vec<usize> = classes.iter().map(|c| CLASS_NAMES.iter().position(|n| n == c).unwrap()).collect();
    let clips: Vec<_> = generate(&cfg).unwrap().into_iter().filter(|c| labels.contains(&c.plan.label)).collect();
    let feats: Vec<[f64; 3]> = clips.iter().map(|c| mean_frame_features(&c.video)).collect();
    // Standardize on the training split.
    let train: Vec<usize> = (0..clips.len()).filter(|&i| clips[i].plan.split == Split::Train).collect();
    let mut mu = [0.0; 3];
    let mut sd = [0.0; 3];
    for d in 0..3 {
        mu[d] = train.iter().map(|&i| feats[i][d]).sum::<f64>() / train.len() as f64;
        sd[d] = (train.iter().map(|&i| (feats[i][d] - mu[d]).powi(2)).sum::<f64>() / train.len() as f64).sqrt();
    }
    let z = |f: &[f64; 3]| [0, 1, 2].map(|d| (f[d] - mu[d]) / sd[d]);
    let centroids: Vec<[f64; 3]> = labels
        .iter()
        .map(|&l| {
            let members: Vec<[f64; 3]> = train.iter().filter(|&&i| clips[i].plan.label == l).map(|&i| z(&feats[i])).collect();
            [0, 1, 2].map(|d| members.iter().map(|m| m[d]).sum::<f64>() / members.len() as f64)
        })
        .collect();
    let val: Vec<usize> = (0..clips.len()).filter(|&i| clips[i].plan.split == Split::Val).collect();
    let correct = val
        .iter()
        .filter(|&&i| {
            let f = z(&feats[i]);
            let best = (0..labels.len())
                .min_by(|&a, &b| {
                    let d = |c: &[f64; 3]| (0..3).map(|k| (f[k] - c[k]).powi(2)).sum::<f64>();
                    d(&centroids[a]).total_cmp(&d(&centroids[b]))
                })
                .unwrap();
            labels[best] == clips[i].plan.label
        })
        .count();
    let acc = correct as f64 / val.len() as f64;
    assert!(acc > 1.0 / labels.len() as f64 + 0.15, "nearest-centroid accuracy {acc}");
}
