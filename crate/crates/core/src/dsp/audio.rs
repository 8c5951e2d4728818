#[allow(unused_imports)]
use num_traits::Float as _;
use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Mono audio in `[-1, 1]` at a fixed sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioClip {
    /// Rejects empty or non-finite input. Peaks above 1 are normalized
    /// down so `|sample| ≤ 1` holds.
    pub fn new(mut samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            bail!(InvalidArgument, "AudioClip::new", "empty sample sequence");
        }
        if sample_rate == 0 {
            bail!(InvalidArgument, "AudioClip::new", "sample rate must be positive");
        }
        if samples.iter().any(|s| !s.is_finite()) {
            bail!(InvalidArgument, "AudioClip::new", "non-finite sample");
        }
        let peak = samples.iter().fold(0.0f32, |m, s| m.max(s.abs()));
        if peak > 1.0 {
            samples.iter_mut().for_each(|s| *s /= peak);
        }
        Ok(Self { samples, sample_rate })
    }

    /// Average interleaved channels down to mono.
    pub fn from_interleaved(interleaved: &[f32], channels: usize, sample_rate: u32) -> Result<Self> {
        if channels == 0 || interleaved.len() % channels != 0 {
            bail!(
                InvalidArgument,
                "AudioClip::from_interleaved",
                "{} samples do not split into {} channels",
                interleaved.len(),
                channels
            );
        }
        let inv = 1.0 / channels as f32;
        let mono = interleaved.chunks(channels).map(|f| f.iter().sum::<f32>() * inv).collect();
        Self::new(mono, sample_rate)
    }

    #[inline]
    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    #[inline]
    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }
}

/// Linear-interpolation resampling; output length is
/// `round(n · target / source)` (at least one sample).
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 {
        bail!(InvalidArgument, "resample", "target rate must be positive");
    }
    let src = clip.samples();
    if clip.sample_rate == target_rate {
        return Ok(clip.clone());
    }
    let ratio = clip.sample_rate as f64 / target_rate as f64;
    let n_out = ((src.len() as f64 / ratio).round() as usize).max(1);
    let last = src.len() - 1;
    let out = (0..n_out)
        .map(|i| {
            let pos = i as f64 * ratio;
            let i0 = (pos.floor() as usize).min(last);
            let i1 = (i0 + 1).min(last);
            let frac = (pos - i0 as f64).min(1.0) as f32;
            src[i0] + (src[i1] - src[i0]) * frac
        })
        .collect();
    AudioClip::new(out, target_rate)
}
