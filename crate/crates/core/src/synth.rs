//! Synthetic audio-visual event clips. Each class is a blob-motion pattern,
//! optionally paired with a class-specific tone burst. Some classes share a
//! motion pattern so that only their sound tells them apart.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float as _;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{bail, Result};
use crate::pipeline::{Illumination, ManifestEntry, Split, AUDIO_SALIENT, CLASS_NAMES};
use crate::rng::stream;
use crate::tensor::Tensor;

const SPLIT: u64 = 0x5350_4c54;
const DARK: u64 = 0x4441_524b;
const CLIP: u64 = 0x434c_4950;

/// How a class moves its blobs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Motion {
    /// Straight line across the frame.
    Linear,
    /// A leader on a line and followers on the same path, delayed.
    Chase,
    /// Blobs start together and fly apart.
    Scatter,
    /// Blobs stay put.
    Static,
}

/// Blob count and motion of a class.
pub fn visual_pattern(class: &str) -> (usize, Motion) {
    match class {
        "run" | "shoot" => (1, Motion::Linear),
        "chase" | "arrest" => (2, Motion::Chase),
        "fight" | "scatter" => (3, Motion::Scatter),
        "knockdown" | "normal1" => (1, Motion::Static),
        _ => (3, Motion::Static),
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SynthConfig {
    pub n_classes: usize,
    pub clips_per_class: usize,
    pub frame_h: usize,
    pub frame_w: usize,
    /// Frames per generated video, `l`.
    pub clip_len: usize,
    pub sample_rate: u32,
    pub duration_s: f64,
    pub audio_salient: Vec<String>,
    pub dark_fraction: f64,
    pub val_fraction: f64,
    pub visual_noise: f64,
    pub audio_noise: f64,
    pub tone_amplitude: f64,
    pub tone_duration_s: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_classes: 9,
            clips_per_class: 40,
            frame_h: 32,
            frame_w: 32,
            clip_len: 60,
            sample_rate: 16_000,
            duration_s: 1.0,
            audio_salient: AUDIO_SALIENT.iter().map(|s| s.to_string()).collect(),
            dark_fraction: 0.0,
            val_fraction: 0.2,
            visual_noise: 0.05,
            audio_noise: 0.05,
            tone_amplitude: 0.5,
            tone_duration_s: 0.4,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn class_names(&self) -> &'static [&'static str] {
        &CLASS_NAMES[..self.n_classes.min(CLASS_NAMES.len())]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes == 0 || self.n_classes > CLASS_NAMES.len() {
            bail!(InvalidArgument, "SynthConfig", "n_classes {} outside 1..=9", self.n_classes);
        }
        if self.clips_per_class == 0 || self.frame_h < 4 || self.frame_w < 4 || self.clip_len == 0 {
            bail!(
                InvalidArgument,
                "SynthConfig",
                "need clips_per_class ≥ 1, frames ≥ 4×4 and clip_len ≥ 1"
            );
        }
        for c in &self.audio_salient {
            if !self.class_names().contains(&c.as_str()) {
                bail!(InvalidArgument, "SynthConfig", "audio-salient class `{}` is not in the class set", c);
            }
        }
        for (name, v) in [("dark_fraction", self.dark_fraction), ("val_fraction", self.val_fraction)] {
            if !(0.0..=1.0).contains(&v) {
                bail!(InvalidArgument, "SynthConfig", "{} {} outside [0, 1]", name, v);
            }
        }
        if self.sample_rate < 8000 || !(self.duration_s > 0.0) {
            bail!(InvalidArgument, "SynthConfig", "sample rate ≥ 8000 Hz and positive duration required");
        }
        if !(self.tone_duration_s > 0.0 && self.tone_duration_s <= self.duration_s) {
            bail!(InvalidArgument, "SynthConfig", "tone duration must lie in (0, duration]");
        }
        if self.visual_noise < 0.0 || self.audio_noise < 0.0 || self.tone_amplitude < 0.0 {
            bail!(InvalidArgument, "SynthConfig", "noise levels and amplitude must be non-negative");
        }
        Ok(())
    }

    /// Tone frequency of a class, `None` for classes without sound.
    /// Frequencies start at 500 Hz and are at least 300 Hz apart.
    pub fn tone_hz(&self, label: usize) -> Option<f64> {
        let name = *self.class_names().get(label)?;
        let salient: Vec<usize> = self
            .class_names()
            .iter()
            .enumerate()
            .filter(|(_, c)| self.audio_salient.iter().any(|s| s == *c))
            .map(|(i, _)| i)
            .collect();
        let k = salient.iter().position(|&i| self.class_names()[i] == name)?;
        let spacing = if salient.len() > 1 {
            (2500.0 / (salient.len() - 1) as f64).min(500.0)
        } else {
            0.0
        };
        Some(500.0 + spacing * k as f64)
    }

    pub fn salient_labels(&self) -> Vec<usize> {
        (0..self.class_names().len()).filter(|&l| self.tone_hz(l).is_some()).collect()
    }
}

/// Layout of one clip before rendering.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipPlan {
    pub index: usize,
    pub id: String,
    pub label: usize,
    pub split: Split,
    pub dark: bool,
    pub time_of_day: u32,
}

/// Assigns ids, splits and dark flags. Splits are `val_fraction` per class;
/// dark clips are drawn per class within each split.
pub fn plan(cfg: &SynthConfig) -> Result<Vec<ClipPlan>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.n_classes * cfg.clips_per_class);
    for label in 0..cfg.n_classes {
        let n = cfg.clips_per_class;
        let n_val = ((cfg.val_fraction * n as f64).round() as usize).min(n);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream(cfg.seed, &[SPLIT, label as u64]));
        let mut split = vec![Split::Train; n];
        for &k in &order[..n_val] {
            split[k] = Split::Val;
        }
        let mut dark = vec![false; n];
        for s in [Split::Train, Split::Val] {
            let mut members: Vec<usize> = (0..n).filter(|&k| split[k] == s).collect();
            let n_dark = (cfg.dark_fraction * members.len() as f64).round() as usize;
            members.shuffle(&mut stream(cfg.seed, &[DARK, label as u64, s as u64]));
            for &k in &members[..n_dark] {
                dark[k] = true;
            }
        }
        for k in 0..n {
            let index = label * n + k;
            let mut r = stream(cfg.seed, &[CLIP, index as u64, 0]);
            // Dark clips happen at night, the rest during the day.
            let time_of_day = if dark[k] {
                (18 * 60 + r.gen_range(0..12 * 60)) % (24 * 60)
            } else {
                6 * 60 + r.gen_range(0..12 * 60)
            };
            out.push(ClipPlan {
                index,
                id: format!("{}_{:04}", cfg.class_names()[label], k),
                label,
                split: split[k],
                dark: dark[k],
                time_of_day,
            });
        }
    }
    Ok(out)
}

/// A rendered clip: `3×l×H×W` video in `[0, 1]` and mono audio.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthClip {
    pub plan: ClipPlan,
    pub video: Tensor<f32>,
    pub audio: Vec<f32>,
}

impl SynthClip {
    pub fn entry(&self, class_names: &[&str], video_path: String, audio_path: String) -> ManifestEntry {
        ManifestEntry {
            id: self.plan.id.clone(),
            video_path,
            audio_path,
            label: self.plan.label,
            class_name: class_names[self.plan.label].to_string(),
            time_of_day: self.plan.time_of_day,
            illumination: if self.plan.dark {
                Illumination::Low
            } else {
                Illumination::Normal
            },
            split: self.plan.split,
        }
    }
}

const BACKGROUND: f64 = 0.1;
const BLOB_PEAK: f64 = 0.8;
const BLOB_SIGMA: f64 = 1.8;
/// Brightness factor and noise multiplier of dark clips.
pub const DARK_SCALE: f64 = 0.25;
pub const DARK_NOISE_GAIN: f64 = 2.0;

fn unit_dir<R: Rng>(r: &mut R) -> (f64, f64) {
    let a = r.gen_range(0.0..core::f64::consts::TAU);
    (a.cos(), a.sin())
}

/// Blob centres `(y, x)` for every frame.
fn trajectories<R: Rng>(r: &mut R, motion: Motion, blobs: usize, l: usize, h: usize, w: usize) -> Vec<Vec<(f64, f64)>> {
    let (hf, wf) = (h as f64, w as f64);
    let span = 0.6 * hf.min(wf);
    let centre = (hf / 2.0 + r.gen_range(-1.5..1.5), wf / 2.0 + r.gen_range(-1.5..1.5));
    let frac = |t: usize| if l > 1 { t as f64 / (l - 1) as f64 } else { 0.0 };
    match motion {
        Motion::Linear | Motion::Chase => {
            let (dy, dx) = unit_dir(r);
            let lag = 0.35;
            (0..blobs)
                .map(|b| {
                    (0..l)
                        .map(|t| {
                            // Followers trail the leader along the same line.
                            let s = (frac(t) - 0.5) * span - b as f64 * lag * span * 0.5;
                            (centre.0 + s * dy, centre.1 + s * dx)
                        })
                        .collect()
                })
                .collect()
        }
        Motion::Scatter => {
            let (dy, dx) = unit_dir(r);
            let base = dy.atan2(dx);
            (0..blobs)
                .map(|b| {
                    let a = base + core::f64::consts::TAU * b as f64 / blobs as f64;
                    (0..l)
                        .map(|t| {
                            let s = 0.5 * span * frac(t);
                            (centre.0 + s * a.sin(), centre.1 + s * a.cos())
                        })
                        .collect()
                })
                .collect()
        }
        Motion::Static => (0..blobs)
            .map(|_| {
                let p = (r.gen_range(3.0..hf - 3.0), r.gen_range(3.0..wf - 3.0));
                (0..l)
                    .map(|_| (p.0 + r.gen_range(-0.3..0.3), p.1 + r.gen_range(-0.3..0.3)))
                    .collect()
            })
            .collect(),
    }
}

fn render_video<R: Rng>(cfg: &SynthConfig, plan: &ClipPlan, r: &mut R) -> Tensor<f32> {
    let (h, w, l) = (cfg.frame_h, cfg.frame_w, cfg.clip_len);
    let (blobs, motion) = visual_pattern(cfg.class_names()[plan.label]);
    let paths = trajectories(r, motion, blobs, l, h, w);
    let (scale, sigma) = if plan.dark {
        (DARK_SCALE, cfg.visual_noise * DARK_NOISE_GAIN)
    } else {
        (1.0, cfg.visual_noise)
    };
    let noise = Normal::new(0.0, sigma.max(1e-12)).expect("finite sigma");
    let plane = h * w;
    let mut data = vec![0.0f32; 3 * l * plane];
    let inv = 1.0 / (2.0 * BLOB_SIGMA * BLOB_SIGMA);
    for t in 0..l {
        let mut clean = vec![BACKGROUND; plane];
        for path in &paths {
            let (cy, cx) = path[t];
            for y in 0..h {
                for x in 0..w {
                    let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                    clean[y * w + x] += BLOB_PEAK * (-d2 * inv).exp();
                }
            }
        }
        for c in 0..3 {
            let base = (c * l + t) * plane;
            for (i, &v) in clean.iter().enumerate() {
                let n = if sigma > 0.0 { noise.sample(r) } else { 0.0 };
                data[base + i] = (v.min(1.0) * scale + n).clamp(0.0, 1.0) as f32;
            }
        }
    }
    Tensor::new(&[3, l, h, w], data).expect("consistent video shape")
}

fn render_audio<R: Rng>(cfg: &SynthConfig, plan: &ClipPlan, r: &mut R) -> Vec<f32> {
    let sr = cfg.sample_rate as f64;
    let n = (cfg.duration_s * sr).round() as usize;
    let mut out: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = r.sample(StandardNormal);
            z * cfg.audio_noise
        })
        .collect();
    if let Some(f) = cfg.tone_hz(plan.label) {
        let len = ((cfg.tone_duration_s * sr).round() as usize).min(n);
        let start = r.gen_range(0..=n - len);
        let phase = r.gen_range(0.0..core::f64::consts::TAU);
        let ramp = ((0.01 * sr) as usize).clamp(1, len.div_ceil(2));
        for i in 0..len {
            let edge = i.min(len - 1 - i);
            let env = if edge < ramp {
                0.5 - 0.5 * (core::f64::consts::PI * edge as f64 / ramp as f64).cos()
            } else {
                1.0
            };
            let t = i as f64 / sr;
            out[start + i] += cfg.tone_amplitude * env * (core::f64::consts::TAU * f * t + phase).sin();
        }
    }
    out.into_iter().map(|v| v.clamp(-1.0, 1.0) as f32).collect()
}

/// Renders one planned clip from its own random stream.
pub fn render(cfg: &SynthConfig, plan: &ClipPlan) -> SynthClip {
    let mut r = stream(cfg.seed, &[CLIP, plan.index as u64, 1]);
    let video = render_video(cfg, plan, &mut r);
    let audio = render_audio(cfg, plan, &mut r);
    SynthClip {
        plan: plan.clone(),
        video,
        audio,
    }
}

/// Plans and renders the whole dataset in memory.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<SynthClip>> {
    Ok(plan(cfg)?.iter().map(|p| render(cfg, p)).collect())
}

/// Multiplies every pixel by `1 − magnitude`.
pub fn darken(video: &Tensor<f32>, magnitude: f64) -> Result<Tensor<f32>> {
    if !(0.0..=1.0).contains(&magnitude) {
        bail!(InvalidArgument, "degrade", "dark magnitude {} outside [0, 1]", magnitude);
    }
    let s = (1.0 - magnitude) as f32;
    Ok(video.map(|v| v * s))
}

/// Adds white noise whose power is `magnitude` times the signal power
/// (SNR = −10·log₁₀ magnitude dB). The result is rescaled when it would
/// leave `[−1, 1]`, which keeps the ratio.
pub fn add_noise<R: Rng>(samples: &[f32], magnitude: f64, rng: &mut R) -> Result<Vec<f32>> {
    if !(magnitude >= 0.0 && magnitude.is_finite()) {
        bail!(InvalidArgument, "degrade", "noise magnitude {} must be finite and ≥ 0", magnitude);
    }
    if magnitude == 0.0 || samples.is_empty() {
        return Ok(samples.to_vec());
    }
    let power = samples.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / samples.len() as f64;
    let sigma = (magnitude * power).sqrt();
    let noisy: Vec<f64> = samples
        .iter()
        .map(|&v| {
            let z: f64 = rng.sample(StandardNormal);
            v as f64 + sigma * z
        })
        .collect();
    let peak = noisy.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let g = if peak > 1.0 { 1.0 / peak } else { 1.0 };
    Ok(noisy.into_iter().map(|v| (v * g) as f32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            clips_per_class: 5,
            clip_len: 8,
            frame_h: 16,
            frame_w: 16,
            duration_s: 0.25,
            tone_duration_s: 0.1,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn tones_are_spaced() {
        let cfg = SynthConfig::default();
        let tones: Vec<f64> = cfg.salient_labels().iter().map(|&l| cfg.tone_hz(l).unwrap()).collect();
        assert_eq!(tones, vec![500.0, 1000.0, 1500.0, 2000.0]);
        assert_eq!(cfg.tone_hz(1), None);
        let all = SynthConfig {
            audio_salient: CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
            ..SynthConfig::default()
        };
        let t: Vec<f64> = (0..9).map(|l| all.tone_hz(l).unwrap()).collect();
        assert!(t.windows(2).all(|p| p[1] - p[0] >= 300.0) && t[8] <= 3000.0);
    }

    #[test]
    fn plan_counts_and_splits() {
        let cfg = SynthConfig {
            dark_fraction: 0.5,
            clips_per_class: 10,
            ..small()
        };
        let p = plan(&cfg).unwrap();
        assert_eq!(p.len(), 90);
        for label in 0..9 {
            let c: Vec<&ClipPlan> = p.iter().filter(|c| c.label == label).collect();
            assert_eq!(c.len(), 10);
            assert_eq!(c.iter().filter(|c| c.split == Split::Val).count(), 2);
            assert_eq!(c.iter().filter(|c| c.split == Split::Val && c.dark).count(), 1);
            assert_eq!(c.iter().filter(|c| c.split == Split::Train && c.dark).count(), 4);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = small();
        let a = generate(&cfg).unwrap();
        assert_eq!(a, generate(&cfg).unwrap());
        let other = generate(&SynthConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(a[0].video, other[0].video);
        assert!(a.iter().all(|c| c.video.data().iter().all(|v| (0.0..=1.0).contains(v))));
        assert!(a.iter().all(|c| c.audio.len() == 4000 && c.audio.iter().all(|v| v.abs() <= 1.0)));
    }

    #[test]
    fn partner_classes_share_motion() {
        assert_eq!(visual_pattern("shoot"), visual_pattern("run"));
        assert_eq!(visual_pattern("arrest"), visual_pattern("chase"));
        assert_eq!(visual_pattern("scatter"), visual_pattern("fight"));
        assert_eq!(visual_pattern("knockdown"), visual_pattern("normal1"));
        assert_ne!(visual_pattern("normal2"), visual_pattern("normal1"));
    }

    #[test]
    fn rejects_unknown_salient_class() {
        let cfg = SynthConfig {
            audio_salient: vec!["sing".into()],
            ..small()
        };
        assert!(plan(&cfg).is_err());
    }

    #[test]
    fn zero_magnitude_degrade_is_identity() {
        let clip = &generate(&small()).unwrap()[0];
        assert_eq!(darken(&clip.video, 0.0).unwrap(), clip.video);
        assert_eq!(add_noise(&clip.audio, 0.0, &mut stream(0, &[])).unwrap(), clip.audio);
    }
}
