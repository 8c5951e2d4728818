use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::plateau::{Plateau, PlateauConfig};
use super::report::EvalReport;
use super::sgd::{sgd_step, SgdState};
use crate::error::{bail, Error, Result};
use crate::model::{init_params, Mode, ModelConfig, ModelInput, ModelParams};
use crate::ops::{softmax_cross_entropy, NormMode};
use crate::pipeline::{occlude, sample_clip, spatial_transform, split_hash, OcclusionKind};
use crate::rng::{f64_word, hash_str, stream};
use crate::tensor::Tensor;

/// `ln` of the default log-mel offset: the value of a silent frame.
fn silence_level() -> f64 {
    <f64 as num_traits::Float>::ln(crate::dsp::LogMelConfig::default().log_offset)
}

const SHUFFLE: u64 = 0x5348_5546;
const AUGMENT: u64 = 0x4155_474d;
const OCCLUDE: u64 = 0x4f43_434c;

/// One decoded clip: sampled frames `3×T×H×W` in `[0, 1]` and its log-mel
/// image `M×F`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub label: usize,
    pub frames: Tensor<f32>,
    pub logmel: Tensor<f32>,
    pub dark: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_floor: f64,
    pub plateau: PlateauConfig,
    pub seed: u64,
    /// Random horizontal flips of training clips.
    pub augment: bool,
    /// Fill for log-mel frames appended when batching unequal lengths.
    pub logmel_pad: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            momentum: 0.9,
            weight_decay: 1e-3,
            batch_size: 12,
            epochs: 80,
            lr_floor: 1e-7,
            plateau: PlateauConfig::default(),
            seed: 0,
            augment: true,
            logmel_pad: silence_level(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        Plateau::new(self.lr, self.lr_floor, self.plateau)?;
        if self.batch_size == 0 || self.epochs == 0 {
            bail!(InvalidArgument, "TrainConfig", "batch_size and epochs must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) || self.weight_decay < 0.0 {
            bail!(
                InvalidArgument,
                "TrainConfig",
                "momentum {} must be in [0, 1) and weight_decay {} ≥ 0",
                self.momentum,
                self.weight_decay
            );
        }
        Ok(())
    }
}

/// One row of the metrics log.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Rate used during this epoch.
    pub lr: f64,
    pub macro_acc: Option<f64>,
    pub per_class_acc: Vec<Option<f64>>,
}

/// Callbacks from the training loop, e.g. to persist checkpoints.
pub trait TrainObserver {
    fn on_epoch(&mut self, log: &EpochLog, params: &ModelParams, is_best: bool) -> Result<()>;
}

impl TrainObserver for () {
    fn on_epoch(&mut self, _: &EpochLog, _: &ModelParams, _: bool) -> Result<()> {
        Ok(())
    }
}

impl<F: FnMut(&EpochLog, &ModelParams, bool) -> Result<()>> TrainObserver for F {
    fn on_epoch(&mut self, log: &EpochLog, params: &ModelParams, is_best: bool) -> Result<()> {
        self(log, params, is_best)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the best validation macro accuracy.
    pub best: ModelParams,
    pub best_epoch: usize,
    pub best_report: EvalReport,
    pub last: ModelParams,
    pub history: Vec<EpochLog>,
    /// Loss of the first mini-batch before any update.
    pub initial_loss: f64,
    pub train_hash: String,
    pub val_hash: String,
}

/// What an evaluation hides or perturbs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Mask {
    #[default]
    None,
    /// Frames replaced by black.
    Visual,
    /// Log-mel replaced by the silence level.
    Audio,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Occlusion {
    pub kind: OcclusionKind,
    pub ratio: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    pub mask: Mask,
    pub occlusion: Option<Occlusion>,
    /// Silence level used by [`Mask::Audio`] and log-mel padding.
    pub logmel_pad: f64,
    pub batch_size: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            mask: Mask::None,
            occlusion: None,
            logmel_pad: silence_level(),
            batch_size: 16,
        }
    }
}

fn clip_frames(params: &ModelParams, s: &Sample) -> Result<Tensor<f32>> {
    let c = &params.config;
    if s.frames.rank() != 4 || s.frames.shape()[0] != 3 {
        bail!(Shape, "batch", "clip `{}` frames {:?} are not 3×T×H×W", s.id, s.frames.shape());
    }
    if s.frames.shape()[1] == c.clip_len {
        Ok(s.frames.clone())
    } else {
        sample_clip(&s.frames, c.clip_len)
    }
}

/// `B×1×M×F_max` with shorter images padded by `pad`.
fn stack_logmel(images: &[&Tensor<f32>], pad: f32) -> Result<Tensor<f32>> {
    let m = images[0].shape()[0];
    let f = images.iter().map(|t| t.shape()[1]).max().unwrap_or(1);
    let mut out = Vec::with_capacity(images.len() * m * f);
    for img in images {
        let s = img.shape();
        if s.len() != 2 || s[0] != m {
            bail!(Shape, "batch", "log-mel {:?} does not match {} mel bins", s, m);
        }
        for row in img.data().chunks(s[1]) {
            out.extend_from_slice(row);
            out.extend(core::iter::repeat(pad).take(f - s[1]));
        }
    }
    Tensor::new(&[images.len(), 1, m, f], out)
}

struct Batch {
    frames: Option<Tensor<f32>>,
    logmel: Option<Tensor<f32>>,
    labels: Vec<usize>,
}

impl Batch {
    fn input(&self) -> ModelInput<'_, f32> {
        ModelInput::new(self.frames.as_ref(), self.logmel.as_ref())
    }
}

fn assemble(
    params: &ModelParams,
    samples: &[&Sample],
    pad: f64,
    mut frames_fn: impl FnMut(&Sample, Tensor<f32>) -> Result<Tensor<f32>>,
    mask: Mask,
) -> Result<Batch> {
    let c = &params.config;
    let frames = if c.mode.uses_visual() {
        let clips = samples
            .iter()
            .map(|s| {
                let f = clip_frames(params, s)?;
                let mut f = frames_fn(s, f)?;
                if mask == Mask::Visual {
                    f.fill(0.0);
                }
                Ok(f)
            })
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Tensor<f32>> = clips.iter().collect();
        Some(Tensor::stack(&refs)?)
    } else {
        None
    };
    let logmel = if c.mode.uses_audio() {
        let refs: Vec<&Tensor<f32>> = samples.iter().map(|s| &s.logmel).collect();
        let mut t = stack_logmel(&refs, pad as f32)?;
        if mask == Mask::Audio {
            t.fill(pad as f32);
        }
        Some(t)
    } else {
        None
    };
    Ok(Batch {
        frames,
        logmel,
        labels: samples.iter().map(|s| s.label).collect(),
    })
}

fn argmax(row: &[f32]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f32::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// Eval-mode prediction and loss for each sample, in order. Samples with
/// equal log-mel length are batched; results do not depend on batching.
pub fn predict(params: &ModelParams, samples: &[Sample], options: &EvalOptions) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::with_capacity(samples.len());
    let mut start = 0;
    let bs = options.batch_size.max(1);
    while start < samples.len() {
        let f = samples[start].logmel.shape().get(1).copied();
        let mut end = start + 1;
        while end < samples.len() && end - start < bs && samples[end].logmel.shape().get(1).copied() == f {
            end += 1;
        }
        let group: Vec<&Sample> = samples[start..end].iter().collect();
        let batch = assemble(
            params,
            &group,
            options.logmel_pad,
            |s, f| match options.occlusion {
                Some(o) if o.ratio > 0.0 => {
                    occlude(&f, o.kind, o.ratio, &mut stream(o.seed, &[OCCLUDE, f64_word(o.ratio), hash_str(&s.id)]))
                }
                _ => Ok(f),
            },
            options.mask,
        )?;
        let pass = params.forward(batch.input(), NormMode::Eval)?;
        let n = params.config.n_classes;
        for (i, row) in pass.logits.data().chunks(n).enumerate() {
            let logits = Tensor::new(&[1, n], row.to_vec())?;
            let (loss, _) = softmax_cross_entropy(&logits, &batch.labels[i..i + 1])?;
            out.push((argmax(row), loss as f64));
        }
        start = end;
    }
    Ok(out)
}

/// Builds the report of [`predict`] output.
pub fn report(samples: &[Sample], predictions: &[(usize, f64)], n_classes: usize) -> Result<EvalReport> {
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let preds: Vec<usize> = predictions.iter().map(|p| p.0).collect();
    let mut r = EvalReport::from_predictions(&labels, &preds, n_classes)?;
    if !predictions.is_empty() {
        r.mean_loss = Some(predictions.iter().map(|p| p.1).sum::<f64>() / predictions.len() as f64);
    }
    Ok(r)
}

pub fn evaluate(params: &ModelParams, samples: &[Sample], options: &EvalOptions) -> Result<EvalReport> {
    let p = predict(params, samples, options)?;
    report(samples, &p, params.config.n_classes)
}

/// Mean cross-entropy of a training-mode pass over `samples` without
/// updating anything.
pub fn batch_loss(params: &ModelParams, samples: &[&Sample], pad: f64) -> Result<f64> {
    let batch = assemble(params, samples, pad, |_, f| Ok(f), Mask::None)?;
    let pass = params.forward(batch.input(), NormMode::Train)?;
    Ok(softmax_cross_entropy(&pass.logits, &batch.labels)?.0 as f64)
}

/// One SGD update on a batch; returns the batch loss before the update.
pub fn train_step(
    params: &mut ModelParams,
    state: &mut SgdState,
    samples: &[&Sample],
    cfg: &TrainConfig,
    lr: f64,
    epoch: usize,
) -> Result<f64> {
    let h = params.config.frame_h;
    let w = params.config.frame_w;
    let batch = assemble(
        params,
        samples,
        cfg.logmel_pad,
        |s, f| spatial_transform(&f, h, w, cfg.augment, &mut stream(cfg.seed, &[AUGMENT, epoch as u64, hash_str(&s.id)])),
        Mask::None,
    )?;
    let pass = params.forward(batch.input(), NormMode::Train)?;
    let (loss, grad) = softmax_cross_entropy(&pass.logits, &batch.labels)?;
    if !loss.is_finite() {
        return Err(Error::Diverged { epoch });
    }
    let grads = params.backward(&pass, &grad)?;
    sgd_step(params, &grads, state, lr, cfg.momentum, cfg.weight_decay)?;
    params.commit(&pass);
    Ok(loss as f64)
}

/// Seeded mini-batch SGD with per-epoch validation and the plateau
/// schedule. The observer sees every epoch (and whether it is the best so
/// far) before the next one starts.
pub fn train(
    model: &ModelConfig,
    cfg: &TrainConfig,
    train_set: &[Sample],
    val_set: &[Sample],
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        bail!(InvalidArgument, "train", "need both splits, got {} train and {} val clips", train_set.len(), val_set.len());
    }
    let mut params = init_params::<f32>(model, cfg.seed)?;
    let mut state = SgdState::new();
    let mut sched = Plateau::new(cfg.lr, cfg.lr_floor, cfg.plateau)?;
    let eval_opts = EvalOptions {
        logmel_pad: cfg.logmel_pad,
        ..EvalOptions::default()
    };
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(ModelParams, usize, EvalReport)> = None;
    let mut initial_loss = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut stream(cfg.seed, &[SHUFFLE, epoch as u64]));
        let lr = sched.lr;
        let (mut sum, mut count) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_set[i]).collect();
            if initial_loss.is_none() {
                initial_loss = Some(batch_loss(&params, &batch, cfg.logmel_pad)?);
            }
            let loss = train_step(&mut params, &mut state, &batch, cfg, lr, epoch)?;
            sum += loss * batch.len() as f64;
            count += batch.len();
        }
        let val = evaluate(&params, val_set, &eval_opts)?;
        let val_loss = val.mean_loss.unwrap_or(f64::NAN);
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        sched.step(val_loss);
        let log = EpochLog {
            epoch,
            train_loss: sum / count as f64,
            val_loss,
            lr,
            macro_acc: val.macro_acc,
            per_class_acc: val.per_class_acc.clone(),
        };
        let score = val.macro_acc.unwrap_or(0.0);
        let is_best = best.as_ref().map_or(true, |b| score > b.2.macro_acc.unwrap_or(0.0));
        if is_best {
            best = Some((params.clone(), epoch, val));
        }
        observer.on_epoch(&log, &params, is_best)?;
        history.push(log);
    }
    let (best, best_epoch, best_report) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        best,
        best_epoch,
        best_report,
        last: params,
        history,
        initial_loss: initial_loss.unwrap_or(f64::NAN),
        train_hash: split_hash(train_set.iter().map(|s| s.id.as_str())),
        val_hash: split_hash(val_set.iter().map(|s| s.id.as_str())),
    })
}

/// One row of an occlusion sweep.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OcclusionRow {
    pub ratio: f64,
    pub per_seed: Vec<EvalReport>,
    pub mean_per_class: Vec<Option<f64>>,
    pub mean_macro: Option<f64>,
}

/// Evaluates under each occlusion ratio and seed. `eval` runs one
/// evaluation (parallel callers pass their own).
pub fn occlusion_sweep_with(
    params: &ModelParams,
    samples: &[Sample],
    kind: OcclusionKind,
    ratios: &[f64],
    seeds: &[u64],
    base: &EvalOptions,
    eval: &dyn Fn(&ModelParams, &[Sample], &EvalOptions) -> Result<EvalReport>,
) -> Result<Vec<OcclusionRow>> {
    if seeds.is_empty() {
        bail!(InvalidArgument, "occlusion_sweep", "need at least one seed");
    }
    let n = params.config.n_classes;
    ratios
        .iter()
        .map(|&ratio| {
            if !(0.0..=1.0).contains(&ratio) {
                bail!(InvalidArgument, "occlusion_sweep", "ratio {} outside [0, 1]", ratio);
            }
            let per_seed = seeds
                .iter()
                .map(|&seed| {
                    let opts = EvalOptions {
                        occlusion: Some(Occlusion { kind, ratio, seed }),
                        ..*base
                    };
                    eval(params, samples, &opts)
                })
                .collect::<Result<Vec<_>>>()?;
            let mean_per_class = (0..n)
                .map(|c| super::report::mean_defined(per_seed.iter().map(|r| r.per_class_acc[c])))
                .collect();
            let mean_macro = super::report::mean_defined(per_seed.iter().map(|r| r.macro_acc));
            Ok(OcclusionRow {
                ratio,
                per_seed,
                mean_per_class,
                mean_macro,
            })
        })
        .collect()
}

pub fn occlusion_sweep(
    params: &ModelParams,
    samples: &[Sample],
    kind: OcclusionKind,
    ratios: &[f64],
    seeds: &[u64],
) -> Result<Vec<OcclusionRow>> {
    occlusion_sweep_with(params, samples, kind, ratios, seeds, &EvalOptions::default(), &evaluate)
}

/// One arm of an ablation.
#[derive(Clone, Debug)]
pub struct AblationArm {
    pub mode: Mode,
    pub outcome: TrainOutcome,
}

/// Trains and evaluates the visual-only, audio-only and audio-visual arms
/// on identical splits and seed.
pub fn ablation_run(
    model: &ModelConfig,
    cfg: &TrainConfig,
    train_set: &[Sample],
    val_set: &[Sample],
) -> Result<Vec<AblationArm>> {
    Mode::ALL
        .iter()
        .map(|&mode| {
            let m = ModelConfig { mode, ..model.clone() };
            Ok(AblationArm {
                mode,
                outcome: train(&m, cfg, train_set, val_set, &mut ())?,
            })
        })
        .collect()
}
