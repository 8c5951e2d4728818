use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::fusion::FusionStrategy;

/// Which feature branches feed the classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Mode {
    VisualOnly,
    AudioOnly,
    AudioVisual,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::VisualOnly, Mode::AudioOnly, Mode::AudioVisual];

    /// Short flag name: `visual`, `audio` or `av`.
    pub fn name(self) -> &'static str {
        match self {
            Mode::VisualOnly => "visual",
            Mode::AudioOnly => "audio",
            Mode::AudioVisual => "av",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "visual" | "visual_only" => Mode::VisualOnly,
            "audio" | "audio_only" => Mode::AudioOnly,
            "av" | "audio_visual" => Mode::AudioVisual,
            _ => bail!(InvalidArgument, "Mode::parse", "unknown mode `{}` (visual|audio|av)", s),
        })
    }

    pub fn uses_visual(self) -> bool {
        self != Mode::AudioOnly
    }

    pub fn uses_audio(self) -> bool {
        self != Mode::VisualOnly
    }
}

/// Residual 3D-conv video backbone layout.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VisualConfig {
    pub stem_channels: usize,
    pub stem_kernel: [usize; 3],
    pub stem_stride: [usize; 3],
    pub stem_padding: [usize; 3],
    /// Output width of each stage; the last one is the feature width `C_v`.
    pub stage_widths: Vec<usize>,
    pub stage_blocks: Vec<usize>,
    /// Stride (all three axes) of the first block of each stage.
    pub stage_strides: Vec<usize>,
}

/// 2-D conv stack over the log-mel image; every layer is a 3×3 conv with
/// batch norm and ReLU. The last width is the feature width `C_a`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AudioConfig {
    pub widths: Vec<usize>,
    pub stride: usize,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BackboneConfig {
    pub visual: VisualConfig,
    pub audio: AudioConfig,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        Self::resnet10()
    }
}

impl BackboneConfig {
    /// ResNet-10-style layout: 4 stages of one basic block, 512-d features.
    pub fn resnet10() -> Self {
        Self {
            visual: VisualConfig {
                stem_channels: 16,
                stem_kernel: [3, 7, 7],
                stem_stride: [1, 2, 2],
                stem_padding: [1, 3, 3],
                stage_widths: vec![16, 32, 64, 512],
                stage_blocks: vec![1, 1, 1, 1],
                stage_strides: vec![1, 2, 2, 2],
            },
            audio: AudioConfig {
                widths: vec![64, 128, 256, 512],
                stride: 2,
            },
        }
    }

    /// Desk-scale layout with 32-d features, sized for 32×32×16 clips on a CPU.
    pub fn tiny() -> Self {
        Self {
            visual: VisualConfig {
                stem_channels: 8,
                stem_kernel: [3, 4, 4],
                stem_stride: [2, 4, 4],
                stem_padding: [1, 0, 0],
                stage_widths: vec![16, 32],
                stage_blocks: vec![1, 1],
                stage_strides: vec![2, 2],
            },
            audio: AudioConfig {
                widths: vec![8, 16, 32, 32],
                stride: 2,
            },
        }
    }

    /// `(C_v, C_a)`
    pub fn feature_dims(&self) -> (usize, usize) {
        (
            *self.visual.stage_widths.last().unwrap_or(&0),
            *self.audio.widths.last().unwrap_or(&0),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let v = &self.visual;
        if v.stage_widths.is_empty()
            || v.stage_widths.len() != v.stage_blocks.len()
            || v.stage_widths.len() != v.stage_strides.len()
        {
            bail!(
                InvalidArgument,
                "BackboneConfig",
                "visual stage lists disagree: widths {:?}, blocks {:?}, strides {:?}",
                v.stage_widths,
                v.stage_blocks,
                v.stage_strides
            );
        }
        if v.stem_channels == 0
            || v.stage_widths.contains(&0)
            || v.stage_blocks.contains(&0)
            || v.stage_strides.contains(&0)
            || v.stem_kernel.contains(&0)
            || v.stem_stride.contains(&0)
        {
            bail!(InvalidArgument, "BackboneConfig", "visual widths, blocks, strides and kernel must be positive");
        }
        if self.audio.widths.is_empty() || self.audio.widths.contains(&0) || self.audio.stride == 0 {
            bail!(InvalidArgument, "BackboneConfig", "audio widths {:?}, stride {}", self.audio.widths, self.audio.stride);
        }
        Ok(())
    }
}

/// Complete description of one network.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelConfig {
    pub backbone: BackboneConfig,
    pub mode: Mode,
    pub fusion: FusionStrategy,
    pub n_classes: usize,
    /// Frames per clip, `T`.
    pub clip_len: usize,
    pub frame_h: usize,
    pub frame_w: usize,
    pub mel_bins: usize,
    /// Hidden widths of the classifier head.
    pub classifier_hidden: [usize; 2],
    /// Max-abs normalization of the LF correlation channel.
    pub lf_normalize: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            backbone: BackboneConfig::default(),
            mode: Mode::AudioVisual,
            fusion: FusionStrategy::Concat,
            n_classes: 9,
            clip_len: 50,
            frame_h: 32,
            frame_w: 32,
            mel_bins: 64,
            classifier_hidden: [512, 256],
            lf_normalize: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.backbone.validate()?;
        self.fusion.validate()?;
        if self.n_classes < 2 {
            bail!(InvalidArgument, "ModelConfig", "need at least 2 classes, got {}", self.n_classes);
        }
        if self.clip_len == 0 || self.frame_h == 0 || self.frame_w == 0 || self.mel_bins == 0 {
            bail!(
                InvalidArgument,
                "ModelConfig",
                "clip geometry {}×{}×{} and {} mel bins must be positive",
                self.clip_len,
                self.frame_h,
                self.frame_w,
                self.mel_bins
            );
        }
        if self.classifier_hidden.contains(&0) {
            bail!(InvalidArgument, "ModelConfig", "classifier widths must be positive");
        }
        self.classifier_input_width()?;
        Ok(())
    }

    /// Channels entering the visual stem (RGB, plus the LF correlation map).
    pub fn visual_in_channels(&self) -> usize {
        if self.uses_lf() {
            4
        } else {
            3
        }
    }

    pub fn uses_lf(&self) -> bool {
        self.mode == Mode::AudioVisual && self.fusion == FusionStrategy::Lf
    }

    /// Width of the feature the classifier receives.
    pub fn classifier_input_width(&self) -> Result<usize> {
        let (cv, ca) = self.backbone.feature_dims();
        match self.mode {
            Mode::VisualOnly => Ok(cv),
            Mode::AudioOnly => Ok(ca),
            Mode::AudioVisual => self.fusion.fused_width(cv, ca),
        }
    }

    /// Human-readable one-line summary.
    pub fn describe(&self) -> String {
        alloc::format!(
            "mode={} fusion={} classes={} clip={}x{}x{} feature={:?}",
            self.mode.name(),
            self.fusion.name(),
            self.n_classes,
            self.clip_len,
            self.frame_h,
            self.frame_w,
            self.backbone.feature_dims()
        )
    }
}
