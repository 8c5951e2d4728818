//! Dataset metadata, temporal sampling, augmentation and occlusion of clips.
//! Clips are `3×T×H×W` tensors with values in `[0, 1]`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float as _;
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{bail, Result};
use crate::ops::bilinear_resize;
use crate::tensor::{Scalar, Tensor};

/// The nine event categories, indexed by label.
pub const CLASS_NAMES: [&str; 9] = [
    "arrest", "chase", "fight", "knockdown", "run", "shoot", "scatter", "normal1", "normal2",
];

/// Classes whose ambient sound identifies them.
pub const AUDIO_SALIENT: [&str; 4] = ["shoot", "scatter", "arrest", "knockdown"];

pub fn class_index(name: &str) -> Option<usize> {
    CLASS_NAMES.iter().position(|&c| c == name)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Illumination {
    #[default]
    Normal,
    Low,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            _ => bail!(InvalidArgument, "Split::parse", "unknown split `{}` (train|val)", s),
        }
    }
}

/// One clip of a dataset manifest.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ManifestEntry {
    pub id: String,
    pub video_path: String,
    pub audio_path: String,
    pub label: usize,
    pub class_name: String,
    /// Minutes since midnight.
    pub time_of_day: u32,
    pub illumination: Illumination,
    pub split: Split,
}

impl ManifestEntry {
    /// Label range, class-name and time checks against a label table.
    pub fn validate(&self, class_names: &[&str]) -> Result<()> {
        if self.label >= class_names.len() {
            bail!(
                InvalidArgument,
                "manifest",
                "entry `{}`: label {} outside [0, {})",
                self.id,
                self.label,
                class_names.len()
            );
        }
        if class_names[self.label] != self.class_name {
            bail!(
                InvalidArgument,
                "manifest",
                "entry `{}`: label {} is `{}`, not `{}`",
                self.id,
                self.label,
                class_names[self.label],
                self.class_name
            );
        }
        if self.time_of_day >= 24 * 60 {
            bail!(InvalidArgument, "manifest", "entry `{}`: time_of_day {} ≥ 1440", self.id, self.time_of_day);
        }
        if self.id.is_empty() {
            bail!(InvalidArgument, "manifest", "entry with empty id");
        }
        Ok(())
    }

    /// Night (18:00 to 06:00) or low illumination.
    pub fn is_dark(&self) -> bool {
        let t = self.time_of_day;
        t >= 18 * 60 || t < 6 * 60 || self.illumination == Illumination::Low
    }
}

pub fn dark_subset(entries: &[ManifestEntry]) -> Vec<ManifestEntry> {
    entries.iter().filter(|e| e.is_dark()).cloned().collect()
}

/// `T` frame indices with stride `max(1, ⌊l/T⌋)`, clamped to the last frame.
pub fn sample_frame_indices(l: usize, t: usize) -> Vec<usize> {
    if l == 0 {
        return vec![0; t];
    }
    let stride = (l / t.max(1)).max(1);
    (0..t).map(|k| (k * stride).min(l - 1)).collect()
}

fn check_clip<T: Scalar>(op: &'static str, frames: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
    let s = frames.shape();
    if s.len() != 4 {
        bail!(Shape, op, "expected C×T×H×W, got {:?}", s);
    }
    Ok((s[0], s[1], s[2], s[3]))
}

fn check_ratio(op: &'static str, r: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&r) {
        bail!(InvalidArgument, op, "ratio {} outside [0, 1]", r);
    }
    Ok(())
}

/// Gathers the sampled frames of a `C×l×H×W` video.
pub fn sample_clip<T: Scalar>(video: &Tensor<T>, t: usize) -> Result<Tensor<T>> {
    let (c, l, h, w) = check_clip("sample_clip", video)?;
    if t == 0 {
        bail!(InvalidArgument, "sample_clip", "clip length must be positive");
    }
    let idx = sample_frame_indices(l, t);
    let plane = h * w;
    let mut out = Vec::with_capacity(c * t * plane);
    for ch in 0..c {
        for &i in &idx {
            let o = (ch * l + i) * plane;
            out.extend_from_slice(&video.data()[o..o + plane]);
        }
    }
    Tensor::new(&[c, t, h, w], out)
}

/// Mirrors every frame left to right.
pub fn hflip<T: Scalar>(frames: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, _, _, w) = check_clip("hflip", frames)?;
    let mut out = frames.clone();
    for row in out.data_mut().chunks_mut(w) {
        row.reverse();
    }
    Ok(out)
}

/// Resizes to `h×w` and, in training mode, flips the whole clip with
/// probability 1/2.
pub fn spatial_transform<T: Scalar, R: Rng>(
    frames: &Tensor<T>,
    h: usize,
    w: usize,
    train: bool,
    rng: &mut R,
) -> Result<Tensor<T>> {
    let (c, t, fh, fw) = check_clip("spatial_transform", frames)?;
    let resized = if (fh, fw) == (h, w) {
        frames.clone()
    } else {
        bilinear_resize(&frames.clone().reshape(&[c * t, fh, fw])?, h, w)?.reshape(&[c, t, h, w])?
    };
    if train && rng.gen_bool(0.5) {
        hflip(&resized)
    } else {
        Ok(resized)
    }
}

/// Blacks out `round(r·T)` distinct frames.
pub fn temporal_patch<T: Scalar, R: Rng>(frames: &Tensor<T>, ratio: f64, rng: &mut R) -> Result<Tensor<T>> {
    check_ratio("temporal_patch", ratio)?;
    let (c, t, h, w) = check_clip("temporal_patch", frames)?;
    let k = (ratio * t as f64).round() as usize;
    let mut out = frames.clone();
    let plane = h * w;
    for f in sample(rng, t, k.min(t)).into_iter() {
        for ch in 0..c {
            let o = (ch * t + f) * plane;
            out.data_mut()[o..o + plane].fill(T::zero());
        }
    }
    Ok(out)
}

/// Extent `(ph, pw)` of a patch covering `round(p·H·W)` pixels: a square,
/// stretched along the free axis when it would not fit.
pub fn patch_extent(h: usize, w: usize, ratio: f64) -> (usize, usize) {
    let area = (ratio * (h * w) as f64).round() as usize;
    if area == 0 {
        return (0, 0);
    }
    let side = ((area as f64).sqrt().round() as usize).max(1);
    if side <= h && side <= w {
        return (side, side);
    }
    if h <= w {
        (h, area.div_ceil(h).min(w))
    } else {
        (area.div_ceil(w).min(h), w)
    }
}

/// Blacks out one patch of area ratio `p` per frame at an independent
/// random position (shared by all channels of that frame).
pub fn spatial_patch<T: Scalar, R: Rng>(frames: &Tensor<T>, ratio: f64, rng: &mut R) -> Result<Tensor<T>> {
    spatial_patches(frames, ratio, 1, rng)
}

/// As [`spatial_patch`], splitting the area over `count` patches per frame.
pub fn spatial_patches<T: Scalar, R: Rng>(
    frames: &Tensor<T>,
    ratio: f64,
    count: usize,
    rng: &mut R,
) -> Result<Tensor<T>> {
    check_ratio("spatial_patch", ratio)?;
    if count == 0 {
        bail!(InvalidArgument, "spatial_patch", "patch count must be positive");
    }
    let (c, t, h, w) = check_clip("spatial_patch", frames)?;
    let (ph, pw) = patch_extent(h, w, ratio / count as f64);
    let mut out = frames.clone();
    if ph == 0 {
        return Ok(out);
    }
    let plane = h * w;
    for f in 0..t {
        for _ in 0..count {
            let y0 = rng.gen_range(0..=h - ph);
            let x0 = rng.gen_range(0..=w - pw);
            for ch in 0..c {
                let base = (ch * t + f) * plane;
                for y in y0..y0 + ph {
                    out.data_mut()[base + y * w + x0..base + y * w + x0 + pw].fill(T::zero());
                }
            }
        }
    }
    Ok(out)
}

/// Occlusion applied at evaluation time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OcclusionKind {
    Temporal,
    Spatial,
}

impl OcclusionKind {
    pub fn name(self) -> &'static str {
        match self {
            OcclusionKind::Temporal => "temporal",
            OcclusionKind::Spatial => "spatial",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "temporal" => Ok(OcclusionKind::Temporal),
            "spatial" => Ok(OcclusionKind::Spatial),
            _ => bail!(InvalidArgument, "OcclusionKind::parse", "unknown kind `{}` (temporal|spatial)", s),
        }
    }
}

pub fn occlude<T: Scalar, R: Rng>(frames: &Tensor<T>, kind: OcclusionKind, ratio: f64, rng: &mut R) -> Result<Tensor<T>> {
    match kind {
        OcclusionKind::Temporal => temporal_patch(frames, ratio, rng),
        OcclusionKind::Spatial => spatial_patch(frames, ratio, rng),
    }
}

/// Order-independent digest of a list of clip ids.
pub fn split_hash<'a>(ids: impl IntoIterator<Item = &'a str>) -> String {
    let mut v: Vec<&str> = ids.into_iter().collect();
    v.sort_unstable();
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for id in v {
        h = crate::rng::hash_bytes(id.as_bytes()) ^ h.rotate_left(5);
        h = crate::rng::splitmix64(h);
    }
    format!("{h:016x}")
}
