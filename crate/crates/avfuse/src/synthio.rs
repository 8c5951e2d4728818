//! Writes synthetic datasets to disk and derives degraded copies.

use std::fs;
use std::path::Path;

use avfuse_core::pipeline::{Illumination, ManifestEntry, CLASS_NAMES};
use avfuse_core::rng::{hash_str, stream};
use avfuse_core::synth::{add_noise, darken, plan, render, SynthConfig};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult, IoContext};
use crate::manifest::{self, Manifest};
use crate::{avt, wav};

pub const MANIFEST: &str = "manifest.jsonl";

const NOISE: u64 = 0x4e4f_4953;

/// SHA-256 over the manifest text and every referenced media file, in
/// manifest order.
pub fn dataset_hash(m: &Manifest) -> AppResult<String> {
    let mut h = Sha256::new();
    h.update(manifest::to_string(&m.entries).as_bytes());
    for e in &m.entries {
        for p in [m.video_path(e), m.audio_path(e)] {
            let bytes = fs::read(&p).at(&p)?;
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
    }
    Ok(hex::encode(h.finalize()))
}

fn media_paths(id: &str) -> (String, String) {
    (format!("videos/{id}.avt"), format!("audio/{id}.wav"))
}

fn make_dirs(out_dir: &Path) -> AppResult<()> {
    for d in ["videos", "audio"] {
        let p = out_dir.join(d);
        fs::create_dir_all(&p).at(&p)?;
    }
    Ok(())
}

/// Renders the whole dataset under `out_dir` and writes its manifest.
pub fn generate(cfg: &SynthConfig, out_dir: &Path) -> AppResult<Manifest> {
    let plans = plan(cfg)?;
    make_dirs(out_dir)?;
    let names = cfg.class_names();
    let entries = plans
        .par_iter()
        .map(|p| -> AppResult<ManifestEntry> {
            let clip = render(cfg, p);
            let (v, a) = media_paths(&p.id);
            avt::write(&out_dir.join(&v), &clip.video)?;
            wav::write(&out_dir.join(&a), &clip.audio, cfg.sample_rate)?;
            Ok(clip.entry(names, v, a))
        })
        .collect::<AppResult<Vec<_>>>()?;
    manifest::save(&entries, &out_dir.join(MANIFEST))?;
    Ok(Manifest {
        root: out_dir.to_path_buf(),
        entries,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DegradeKind {
    /// Brightness multiplied by `1 − magnitude`.
    Dark,
    /// White noise at `magnitude` times the signal power.
    AudioNoise,
}

impl DegradeKind {
    pub fn name(self) -> &'static str {
        match self {
            DegradeKind::Dark => "dark",
            DegradeKind::AudioNoise => "audio_noise",
        }
    }

    pub fn parse(s: &str) -> AppResult<Self> {
        match s {
            "dark" => Ok(DegradeKind::Dark),
            "audio_noise" => Ok(DegradeKind::AudioNoise),
            _ => Err(AppError::validation(format!("unknown degradation `{s}` (expected dark or audio_noise)"))),
        }
    }
}

/// Id of a degraded copy, e.g. `shoot_0003~dark0.75`.
pub fn degraded_id(id: &str, kind: DegradeKind, magnitude: f64) -> String {
    format!("{id}~{}{magnitude}", kind.name())
}

/// Writes degraded copies of every entry of `source` under `out_dir`.
/// Untouched media are copied verbatim; the source is never modified.
pub fn degrade(source: &Manifest, kind: DegradeKind, magnitude: f64, seed: u64, out_dir: &Path) -> AppResult<Manifest> {
    if !(magnitude >= 0.0 && magnitude.is_finite()) || (kind == DegradeKind::Dark && magnitude > 1.0) {
        return Err(AppError::validation(format!("{} magnitude {magnitude} out of range", kind.name())));
    }
    make_dirs(out_dir)?;
    let entries = source
        .entries
        .par_iter()
        .map(|e| -> AppResult<ManifestEntry> {
            let id = degraded_id(&e.id, kind, magnitude);
            let (v, a) = media_paths(&id);
            let (src_v, src_a) = (source.video_path(e), source.audio_path(e));
            let (dst_v, dst_a) = (out_dir.join(&v), out_dir.join(&a));
            let mut out = e.clone();
            match kind {
                DegradeKind::Dark => {
                    avt::write(&dst_v, &darken(&avt::read(&src_v)?, magnitude)?)?;
                    fs::copy(&src_a, &dst_a).at(&dst_a)?;
                    if magnitude > 0.0 {
                        out.illumination = Illumination::Low;
                    }
                }
                DegradeKind::AudioNoise => {
                    fs::copy(&src_v, &dst_v).at(&dst_v)?;
                    let clip = wav::read(&src_a)?;
                    let noisy = add_noise(clip.samples(), magnitude, &mut stream(seed, &[NOISE, hash_str(&e.id)]))?;
                    wav::write(&dst_a, &noisy, clip.sample_rate())?;
                }
            }
            out.id = id;
            out.video_path = v;
            out.audio_path = a;
            Ok(out)
        })
        .collect::<AppResult<Vec<_>>>()?;
    manifest::save(&entries, &out_dir.join(MANIFEST))?;
    Ok(Manifest {
        root: out_dir.to_path_buf(),
        entries,
    })
}

/// The class table a manifest is checked against: the 9 event names.
pub fn class_table() -> &'static [&'static str] {
    &CLASS_NAMES
}
