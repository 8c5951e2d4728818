//! Turns manifest entries into in-memory training samples.

use std::fs;
use std::path::{Path, PathBuf};

use avfuse_core::dsp::{LogMelConfig, LogMelExtractor};
use avfuse_core::pipeline::{sample_clip, spatial_transform, ManifestEntry};
use avfuse_core::train::Sample;
use rayon::prelude::*;

use crate::error::{AppError, AppResult, IoContext};
use crate::manifest::Manifest;
use crate::{avt, wav};

const CACHE_CONFIG: &str = "logmel.json";

/// Geometry the loaded samples must have.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadOptions {
    pub clip_len: usize,
    pub frame_h: usize,
    pub frame_w: usize,
    pub logmel: LogMelConfig,
    /// Directory written by [`preprocess`]; log-mels are computed from the
    /// WAV files when absent.
    pub cache: Option<PathBuf>,
}

fn cache_file(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.avt"))
}

/// Computes and stores the log-mel image of every entry under `dir`,
/// together with the front-end configuration used.
pub fn preprocess(manifest: &Manifest, entries: &[ManifestEntry], config: &LogMelConfig, dir: &Path) -> AppResult<usize> {
    let extractor = LogMelExtractor::new(config.clone())?;
    fs::create_dir_all(dir).at(dir)?;
    entries.par_iter().try_for_each(|e| -> AppResult<()> {
        let clip = wav::read(&manifest.audio_path(e))?;
        let lm = extractor.extract(&clip)?;
        avt::write(&cache_file(dir, &e.id), &lm.values)
    })?;
    let meta = dir.join(CACHE_CONFIG);
    fs::write(&meta, serde_json::to_string_pretty(config).expect("config serializes")).at(&meta)?;
    Ok(entries.len())
}

fn check_cache(dir: &Path, config: &LogMelConfig) -> AppResult<()> {
    let meta = dir.join(CACHE_CONFIG);
    let text = fs::read_to_string(&meta)
        .map_err(|_| AppError::validation(format!("{} is not a log-mel cache (no {CACHE_CONFIG})", dir.display())))?;
    let stored: LogMelConfig = serde_json::from_str(&text).map_err(|e| AppError::format(&meta, e.to_string()))?;
    if &stored != config {
        return Err(AppError::validation(format!(
            "log-mel cache {} was built with a different audio configuration",
            dir.display()
        )));
    }
    Ok(())
}

fn load_one(manifest: &Manifest, e: &ManifestEntry, opts: &LoadOptions, extractor: &LogMelExtractor) -> AppResult<Sample> {
    let vpath = manifest.video_path(e);
    let video = avt::read(&vpath)?;
    if video.rank() != 4 || video.shape()[0] != 3 {
        return Err(AppError::format(&vpath, format!("video {:?} is not 3×l×H×W", video.shape())));
    }
    let clip = sample_clip(&video, opts.clip_len)?;
    // Eval-mode transform: resize only, the rng is never consulted.
    let frames = spatial_transform(&clip, opts.frame_h, opts.frame_w, false, &mut avfuse_core::rng::stream(0, &[]))?;
    let logmel = match &opts.cache {
        Some(dir) => {
            let t = avt::read(&cache_file(dir, &e.id))?;
            if t.rank() != 2 || t.shape()[0] != opts.logmel.mel_bins {
                return Err(AppError::format(&cache_file(dir, &e.id), format!("cached log-mel {:?}", t.shape())));
            }
            t
        }
        None => extractor.extract(&wav::read(&manifest.audio_path(e))?)?.values,
    };
    Ok(Sample {
        id: e.id.clone(),
        label: e.label,
        frames,
        logmel,
        dark: e.is_dark(),
    })
}

/// Loads `entries` in parallel; the result keeps their order.
pub fn load_samples(manifest: &Manifest, entries: &[ManifestEntry], opts: &LoadOptions) -> AppResult<Vec<Sample>> {
    if let Some(dir) = &opts.cache {
        check_cache(dir, &opts.logmel)?;
    }
    let extractor = LogMelExtractor::new(opts.logmel.clone())?;
    entries.par_iter().map(|e| load_one(manifest, e, opts, &extractor)).collect()
}
