use alloc::vec::Vec;

use super::audio::{resample, AudioClip};
use super::mel::mel_filterbank;
use super::stft::stft_power;
use crate::error::{bail, Result};
use crate::ops::gemm::gemm_nn;
use crate::tensor::Tensor;

/// Log-mel front-end parameters. Defaults follow the VGGish input chain:
/// 16 kHz, 25 ms window, 10 ms hop, 64 bands over 125–7500 Hz, log offset 0.01.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogMelConfig {
    pub sample_rate: u32,
    pub window_len: usize,
    pub hop: usize,
    pub mel_bins: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub log_offset: f64,
}

impl Default for LogMelConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            window_len: 400,
            hop: 160,
            mel_bins: 64,
            f_min: 125.0,
            f_max: 7500.0,
            log_offset: 0.01,
        }
    }
}

impl LogMelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 || self.window_len < 2 || self.hop == 0 {
            bail!(
                InvalidArgument,
                "LogMelConfig",
                "sample_rate {}, window {}, hop {}",
                self.sample_rate,
                self.window_len,
                self.hop
            );
        }
        if !(self.log_offset > 0.0 && self.log_offset.is_finite()) {
            bail!(InvalidArgument, "LogMelConfig", "log offset must be positive, got {}", self.log_offset);
        }
        Ok(())
    }

    /// Frames produced for `n` samples already at the target rate, after
    /// padding to one window.
    pub fn frames_for(&self, n: usize) -> usize {
        1 + (n.max(self.window_len) - self.window_len) / self.hop
    }
}

/// Log-mel spectrogram, `mel_bins × frames` (bands as rows).
#[derive(Clone, Debug, PartialEq)]
pub struct LogMel {
    pub values: Tensor<f32>,
    pub window_len: usize,
    pub hop: usize,
}

impl LogMel {
    pub fn mel_bins(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn frames(&self) -> usize {
        self.values.shape()[1]
    }
}

/// Reusable log-mel extractor holding the filterbank.
#[derive(Clone, Debug)]
pub struct LogMelExtractor {
    config: LogMelConfig,
    filters: Tensor<f32>,
}

impl LogMelExtractor {
    pub fn new(config: LogMelConfig) -> Result<Self> {
        config.validate()?;
        let filters = mel_filterbank(
            config.window_len / 2 + 1,
            config.mel_bins,
            config.f_min,
            config.f_max,
            config.sample_rate,
        )?;
        Ok(Self { config, filters })
    }

    pub fn config(&self) -> &LogMelConfig {
        &self.config
    }

    /// Mel-band energies before the log, `mel_bins × frames`.
    pub fn mel_energies(&self, clip: &AudioClip) -> Result<Tensor<f32>> {
        let cfg = &self.config;
        let clip = resample(clip, cfg.sample_rate)?;
        let mut samples: Vec<f32> = clip.into_samples();
        if samples.len() < cfg.window_len {
            samples.resize(cfg.window_len, 0.0);
        }
        let power = stft_power(&samples, cfg.window_len, cfg.hop)?;
        let (bins, frames) = (power.shape()[0], power.shape()[1]);
        let mut mel = Tensor::zeros(&[cfg.mel_bins, frames]);
        gemm_nn(mel.data_mut(), self.filters.data(), power.data(), cfg.mel_bins, bins, frames);
        Ok(mel)
    }

    /// `log(mel + offset)`.
    pub fn extract(&self, clip: &AudioClip) -> Result<LogMel> {
        let offset = self.config.log_offset;
        let values = self
            .mel_energies(clip)?
            .map(|e| num_traits::Float::ln(e.max(0.0) as f64 + offset) as f32);
        Ok(LogMel {
            values,
            window_len: self.config.window_len,
            hop: self.config.hop,
        })
    }

    /// The value a silent frame maps to.
    pub fn silence_level(&self) -> f32 {
        num_traits::Float::ln(self.config.log_offset) as f32
    }
}

/// One-shot log-mel: resample, pad to a window, power STFT, mel projection, log.
pub fn log_mel(clip: &AudioClip, config: &LogMelConfig) -> Result<LogMel> {
    LogMelExtractor::new(config.clone())?.extract(clip)
}
