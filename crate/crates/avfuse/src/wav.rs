//! 16-bit PCM WAV input and output.

use std::path::Path;

use avfuse_core::dsp::AudioClip;

use crate::error::{AppError, AppResult};

/// Reads a mono or stereo 16-bit PCM file; channels are averaged.
pub fn read(path: &Path) -> AppResult<AudioClip> {
    let reader = hound::WavReader::open(path).map_err(|e| AppError::format(path, e.to_string()))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(AppError::format(
            path,
            format!("expected 16-bit PCM, found {:?} {}-bit", spec.sample_format, spec.bits_per_sample),
        ));
    }
    if !(1..=2).contains(&spec.channels) {
        return Err(AppError::format(path, format!("{} channels (mono or stereo supported)", spec.channels)));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f32 / 32768.0))
        .collect::<Result<Vec<f32>, _>>()
        .map_err(|e| AppError::format(path, e.to_string()))?;
    AudioClip::from_interleaved(&samples, spec.channels as usize, spec.sample_rate)
        .map_err(|e| AppError::format(path, e.to_string()))
}

/// Inverse of the `i / 32768` scaling used by [`read`], saturating at the
/// 16-bit range, so decoded samples re-encode to the same codes.
pub fn quantize(v: f32) -> i16 {
    (v as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Writes mono 16-bit PCM.
pub fn write(path: &Path, samples: &[f32], sample_rate: u32) -> AppResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| AppError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let err = |e: hound::Error| AppError::format(path, e.to_string());
    let mut w = hound::WavWriter::create(path, spec).map_err(err)?;
    for &s in samples {
        w.write_sample(quantize(s)).map_err(err)?;
    }
    w.finalize().map_err(err)
}
