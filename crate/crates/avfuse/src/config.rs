//! Run configuration: flat `key = value` text with `[section]` headers.
//!
//! Precedence, lowest first: built-in defaults, the `--config` file,
//! `--set section.key=value` overrides in order, then dedicated flags such
//! as `--seed` or `--mode`. Every run writes the merged result with
//! [`RunConfig::to_text`], which parses back to the same configuration.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use avfuse_core::dsp::LogMelConfig;
use avfuse_core::fusion::{FusionStrategy, DEFAULT_UM_SCALE};
use avfuse_core::model::{BackboneConfig, Mode, ModelConfig};
use avfuse_core::pipeline::{OcclusionKind, Split};
use avfuse_core::synth::SynthConfig;
use avfuse_core::train::TrainConfig;

use crate::error::{AppError, AppResult};
use crate::synthio::DegradeKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backbone {
    Tiny,
    Resnet10,
}

impl Backbone {
    pub fn name(self) -> &'static str {
        match self {
            Backbone::Tiny => "tiny",
            Backbone::Resnet10 => "resnet10",
        }
    }

    pub fn config(self) -> BackboneConfig {
        match self {
            Backbone::Tiny => BackboneConfig::tiny(),
            Backbone::Resnet10 => BackboneConfig::resnet10(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSection {
    pub backbone: Backbone,
    pub mode: Mode,
    /// Strategy name; the scale of `concat_um` comes from `um_scale`.
    pub fusion: String,
    pub um_scale: f64,
    pub clip_len: usize,
    pub frame_h: usize,
    pub frame_w: usize,
    pub classifier_hidden: [usize; 2],
    pub lf_normalize: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            backbone: Backbone::Tiny,
            mode: Mode::AudioVisual,
            fusion: "concat".into(),
            um_scale: DEFAULT_UM_SCALE,
            clip_len: 16,
            frame_h: 32,
            frame_w: 32,
            classifier_hidden: [512, 256],
            lf_normalize: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSection {
    pub split: Split,
    /// Restrict to the dark subset.
    pub dark: bool,
    /// Modalities fed to the model; `None` feeds whatever it was trained on.
    pub mode: Option<Mode>,
    pub batch_size: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            split: Split::Val,
            dark: false,
            mode: None,
            batch_size: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OccludeSection {
    pub kind: OcclusionKind,
    pub ratios: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for OccludeSection {
    fn default() -> Self {
        Self {
            kind: OcclusionKind::Spatial,
            ratios: vec![0.0, 0.2, 0.4, 0.6, 0.8],
            seeds: vec![0, 1, 2, 3, 4],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegradeSection {
    pub kind: DegradeKind,
    pub magnitude: f64,
}

impl Default for DegradeSection {
    fn default() -> Self {
        Self {
            kind: DegradeKind::Dark,
            magnitude: 0.75,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathsSection {
    pub manifest: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub logmel_cache: Option<PathBuf>,
}

/// Everything a subcommand may need. `seed` drives both generation and
/// training; the `seed` fields inside `synth` and `train` are ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub synth: SynthConfig,
    pub audio: LogMelConfig,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub occlude: OccludeSection,
    pub degrade: DegradeSection,
    pub paths: PathsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            synth: SynthConfig::default(),
            audio: LogMelConfig::default(),
            model: ModelSection::default(),
            train: TrainConfig::default(),
            eval: EvalSection::default(),
            occlude: OccludeSection::default(),
            degrade: DegradeSection::default(),
            paths: PathsSection::default(),
        }
    }
}

fn scalar<T: FromStr>(key: &str, v: &str) -> AppResult<T>
where
    T::Err: Display,
{
    v.parse()
        .map_err(|e| AppError::validation(format!("`{key}`: cannot parse `{v}`: {e}")))
}

fn list<T: FromStr>(key: &str, v: &str) -> AppResult<Vec<T>>
where
    T::Err: Display,
{
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| scalar(key, s.trim())).collect()
}

fn core<T>(key: &str, r: avfuse_core::Result<T>) -> AppResult<T> {
    r.map_err(|e| AppError::validation(format!("`{key}`: {e}")))
}

fn join<T: Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl RunConfig {
    /// Sets one dotted key (`seed`, `train.epochs`, ...).
    pub fn set(&mut self, key: &str, value: &str) -> AppResult<()> {
        let v = value.trim();
        let k = key.trim();
        match k {
            "seed" => self.seed = scalar(k, v)?,

            "synth.n_classes" => self.synth.n_classes = scalar(k, v)?,
            "synth.clips_per_class" => self.synth.clips_per_class = scalar(k, v)?,
            "synth.frame_h" => self.synth.frame_h = scalar(k, v)?,
            "synth.frame_w" => self.synth.frame_w = scalar(k, v)?,
            "synth.clip_len" => self.synth.clip_len = scalar(k, v)?,
            "synth.sample_rate" => self.synth.sample_rate = scalar(k, v)?,
            "synth.duration_s" => self.synth.duration_s = scalar(k, v)?,
            "synth.audio_salient" => self.synth.audio_salient = list(k, v)?,
            "synth.dark_fraction" => self.synth.dark_fraction = scalar(k, v)?,
            "synth.val_fraction" => self.synth.val_fraction = scalar(k, v)?,
            "synth.visual_noise" => self.synth.visual_noise = scalar(k, v)?,
            "synth.audio_noise" => self.synth.audio_noise = scalar(k, v)?,
            "synth.tone_amplitude" => self.synth.tone_amplitude = scalar(k, v)?,
            "synth.tone_duration_s" => self.synth.tone_duration_s = scalar(k, v)?,

            "audio.sample_rate" => self.audio.sample_rate = scalar(k, v)?,
            "audio.window_len" => self.audio.window_len = scalar(k, v)?,
            "audio.hop" => self.audio.hop = scalar(k, v)?,
            "audio.mel_bins" => self.audio.mel_bins = scalar(k, v)?,
            "audio.f_min" => self.audio.f_min = scalar(k, v)?,
            "audio.f_max" => self.audio.f_max = scalar(k, v)?,
            "audio.log_offset" => self.audio.log_offset = scalar(k, v)?,

            "model.backbone" => {
                self.model.backbone = match v {
                    "tiny" => Backbone::Tiny,
                    "resnet10" => Backbone::Resnet10,
                    _ => return Err(AppError::validation(format!("`{k}`: expected tiny or resnet10, got `{v}`"))),
                }
            }
            "model.mode" => self.model.mode = core(k, Mode::parse(v))?,
            "model.fusion" => self.model.fusion = core(k, FusionStrategy::parse(v))?.name().to_string(),
            "model.um_scale" => self.model.um_scale = scalar(k, v)?,
            "model.clip_len" => self.model.clip_len = scalar(k, v)?,
            "model.frame_h" => self.model.frame_h = scalar(k, v)?,
            "model.frame_w" => self.model.frame_w = scalar(k, v)?,
            "model.classifier_hidden" => {
                let xs: Vec<usize> = list(k, v)?;
                self.model.classifier_hidden = xs
                    .try_into()
                    .map_err(|_| AppError::validation(format!("`{k}`: expected two widths, got `{v}`")))?;
            }
            "model.lf_normalize" => self.model.lf_normalize = scalar(k, v)?,

            "train.lr" => self.train.lr = scalar(k, v)?,
            "train.momentum" => self.train.momentum = scalar(k, v)?,
            "train.weight_decay" => self.train.weight_decay = scalar(k, v)?,
            "train.batch_size" => self.train.batch_size = scalar(k, v)?,
            "train.epochs" => self.train.epochs = scalar(k, v)?,
            "train.lr_floor" => self.train.lr_floor = scalar(k, v)?,
            "train.plateau_factor" => self.train.plateau.factor = scalar(k, v)?,
            "train.plateau_patience" => self.train.plateau.patience = scalar(k, v)?,
            "train.plateau_min_delta" => self.train.plateau.min_delta = scalar(k, v)?,
            "train.augment" => self.train.augment = scalar(k, v)?,
            "train.logmel_pad" => self.train.logmel_pad = scalar(k, v)?,

            "eval.split" => self.eval.split = core(k, Split::parse(v))?,
            "eval.dark" => self.eval.dark = scalar(k, v)?,
            "eval.mode" => self.eval.mode = if v.is_empty() { None } else { Some(core(k, Mode::parse(v))?) },
            "eval.batch_size" => self.eval.batch_size = scalar(k, v)?,

            "occlude.kind" => self.occlude.kind = core(k, OcclusionKind::parse(v))?,
            "occlude.ratios" => self.occlude.ratios = list(k, v)?,
            "occlude.seeds" => self.occlude.seeds = list(k, v)?,

            "degrade.kind" => self.degrade.kind = DegradeKind::parse(v)?,
            "degrade.magnitude" => self.degrade.magnitude = scalar(k, v)?,

            "paths.manifest" => self.paths.manifest = opt_path(v),
            "paths.checkpoint" => self.paths.checkpoint = opt_path(v),
            "paths.logmel_cache" => self.paths.logmel_cache = opt_path(v),

            _ => return Err(AppError::validation(format!("unknown configuration key `{k}`"))),
        }
        Ok(())
    }

    /// Applies `section.key=value`.
    pub fn set_assignment(&mut self, assignment: &str) -> AppResult<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| AppError::validation(format!("override `{assignment}` is not key=value")))?;
        self.set(k, v)
    }

    /// Applies a configuration file's text on top of `self`.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> AppResult<()> {
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let at = |e: AppError| match e {
                AppError::Validation(m) => AppError::validation(format!("{}:{}: {m}", origin.display(), i + 1)),
                other => other,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| at(AppError::validation(format!("expected `key = value`, got `{line}`"))))?;
            let key = if section.is_empty() {
                k.trim().to_string()
            } else {
                format!("{section}.{}", k.trim())
            };
            self.set(&key, v).map_err(at)?;
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> AppResult<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::validation(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text, path)
    }

    pub fn fusion(&self) -> AppResult<FusionStrategy> {
        let f = core("model.fusion", FusionStrategy::parse(&self.model.fusion))?;
        Ok(match f {
            FusionStrategy::ConcatUm { .. } => FusionStrategy::ConcatUm {
                scale: self.model.um_scale,
            },
            other => other,
        })
    }

    pub fn model_config(&self) -> AppResult<ModelConfig> {
        let m = &self.model;
        let cfg = ModelConfig {
            backbone: m.backbone.config(),
            mode: m.mode,
            fusion: self.fusion()?,
            n_classes: self.synth.n_classes,
            clip_len: m.clip_len,
            frame_h: m.frame_h,
            frame_w: m.frame_w,
            mel_bins: self.audio.mel_bins,
            classifier_hidden: m.classifier_hidden,
            lf_normalize: m.lf_normalize,
        };
        core("model", cfg.validate())?;
        Ok(cfg)
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            ..self.synth.clone()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    /// Checks every section; called before any side effect.
    pub fn validate(&self) -> AppResult<()> {
        core("synth", self.synth_config().validate())?;
        core("audio", self.audio.validate())?;
        core("train", self.train_config().validate())?;
        self.model_config()?;
        if self.eval.batch_size == 0 {
            return Err(AppError::validation("`eval.batch_size` must be positive"));
        }
        if let Some(r) = self.occlude.ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(AppError::validation(format!("`occlude.ratios`: {r} outside [0, 1]")));
        }
        if self.occlude.ratios.is_empty() || self.occlude.seeds.is_empty() {
            return Err(AppError::validation("`occlude.ratios` and `occlude.seeds` must not be empty"));
        }
        let d = &self.degrade;
        if !(d.magnitude >= 0.0 && d.magnitude.is_finite()) || (d.kind == DegradeKind::Dark && d.magnitude > 1.0) {
            return Err(AppError::validation(format!("`degrade.magnitude` {} out of range", d.magnitude)));
        }
        Ok(())
    }

    /// Every key with its resolved value, in a form [`RunConfig::apply_text`]
    /// reads back.
    pub fn to_text(&self) -> String {
        let s = &self.synth;
        let a = &self.audio;
        let m = &self.model;
        let t = &self.train;
        let e = &self.eval;
        let o = &self.occlude;
        let sections: Vec<(&str, Vec<(&str, String)>)> = vec![
            ("", vec![("seed", self.seed.to_string())]),
            (
                "synth",
                vec![
                    ("n_classes", s.n_classes.to_string()),
                    ("clips_per_class", s.clips_per_class.to_string()),
                    ("frame_h", s.frame_h.to_string()),
                    ("frame_w", s.frame_w.to_string()),
                    ("clip_len", s.clip_len.to_string()),
                    ("sample_rate", s.sample_rate.to_string()),
                    ("duration_s", s.duration_s.to_string()),
                    ("audio_salient", s.audio_salient.join(",")),
                    ("dark_fraction", s.dark_fraction.to_string()),
                    ("val_fraction", s.val_fraction.to_string()),
                    ("visual_noise", s.visual_noise.to_string()),
                    ("audio_noise", s.audio_noise.to_string()),
                    ("tone_amplitude", s.tone_amplitude.to_string()),
                    ("tone_duration_s", s.tone_duration_s.to_string()),
                ],
            ),
            (
                "audio",
                vec![
                    ("sample_rate", a.sample_rate.to_string()),
                    ("window_len", a.window_len.to_string()),
                    ("hop", a.hop.to_string()),
                    ("mel_bins", a.mel_bins.to_string()),
                    ("f_min", a.f_min.to_string()),
                    ("f_max", a.f_max.to_string()),
                    ("log_offset", a.log_offset.to_string()),
                ],
            ),
            (
                "model",
                vec![
                    ("backbone", m.backbone.name().to_string()),
                    ("mode", m.mode.name().to_string()),
                    ("fusion", m.fusion.clone()),
                    ("um_scale", m.um_scale.to_string()),
                    ("clip_len", m.clip_len.to_string()),
                    ("frame_h", m.frame_h.to_string()),
                    ("frame_w", m.frame_w.to_string()),
                    ("classifier_hidden", join(&m.classifier_hidden)),
                    ("lf_normalize", m.lf_normalize.to_string()),
                ],
            ),
            (
                "train",
                vec![
                    ("lr", t.lr.to_string()),
                    ("momentum", t.momentum.to_string()),
                    ("weight_decay", t.weight_decay.to_string()),
                    ("batch_size", t.batch_size.to_string()),
                    ("epochs", t.epochs.to_string()),
                    ("lr_floor", t.lr_floor.to_string()),
                    ("plateau_factor", t.plateau.factor.to_string()),
                    ("plateau_patience", t.plateau.patience.to_string()),
                    ("plateau_min_delta", t.plateau.min_delta.to_string()),
                    ("augment", t.augment.to_string()),
                    ("logmel_pad", t.logmel_pad.to_string()),
                ],
            ),
            (
                "eval",
                vec![
                    ("split", e.split.name().to_string()),
                    ("dark", e.dark.to_string()),
                    ("mode", e.mode.map(|m| m.name().to_string()).unwrap_or_default()),
                    ("batch_size", e.batch_size.to_string()),
                ],
            ),
            (
                "occlude",
                vec![
                    ("kind", o.kind.name().to_string()),
                    ("ratios", join(&o.ratios)),
                    ("seeds", join(&o.seeds)),
                ],
            ),
            (
                "degrade",
                vec![
                    ("kind", self.degrade.kind.name().to_string()),
                    ("magnitude", self.degrade.magnitude.to_string()),
                ],
            ),
            (
                "paths",
                vec![
                    ("manifest", path_text(&self.paths.manifest)),
                    ("checkpoint", path_text(&self.paths.checkpoint)),
                    ("logmel_cache", path_text(&self.paths.logmel_cache)),
                ],
            ),
        ];
        let mut out = String::new();
        for (name, keys) in sections {
            if !name.is_empty() {
                out.push_str(&format!("\n[{name}]\n"));
            }
            for (k, v) in keys {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }
}
