use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::branches::{AudioBranch, AudioCache, ClassifierCache, ClassifierHead, VisualBranch, VisualCache};
use super::config::{Mode, ModelConfig};
use crate::error::{bail, Error, Result};
use crate::fusion::{fuse, fuse_backward, lf_inject, lf_inject_backward, FuseCache, FusionStrategy, LayerNormAffine, LfCache};
use crate::ops::{NormMode, RunningStats};
use crate::tensor::{Scalar, Tensor};

/// One batch of inputs. Which fields are required depends on the mode.
#[derive(Clone, Copy, Debug, Default)]
pub struct ModelInput<'a, T = f32> {
    /// `B×3×T×H×W`, values in `[0, 1]`.
    pub frames: Option<&'a Tensor<T>>,
    /// `B×1×M×F`
    pub logmel: Option<&'a Tensor<T>>,
}

impl<'a, T> ModelInput<'a, T> {
    pub fn new(frames: Option<&'a Tensor<T>>, logmel: Option<&'a Tensor<T>>) -> Self {
        Self { frames, logmel }
    }
}

/// All learnable weights and batch-norm statistics of a network. The same
/// type doubles as the gradient container (statistics unused there).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T = f32> {
    pub config: ModelConfig,
    pub visual: Option<VisualBranch<T>>,
    pub audio: Option<AudioBranch<T>>,
    pub fusion_norm: Option<LayerNormAffine<T>>,
    pub classifier: ClassifierHead<T>,
}

#[derive(Clone, Debug)]
struct Cache<T> {
    visual: Option<VisualCache<T>>,
    audio: Option<AudioCache<T>>,
    fuse: Option<FuseCache<T>>,
    lf: Option<LfCache<T>>,
    classifier: ClassifierCache<T>,
}

/// Result of [`ModelParams::forward`]: logits plus what backward needs.
#[derive(Clone, Debug)]
pub struct ForwardPass<T = f32> {
    pub logits: Tensor<T>,
    /// Fused feature entering the classifier.
    pub features: Tensor<T>,
    pub mode: NormMode,
    cache: Cache<T>,
}

/// Deterministic initialization: the same config and seed give bit-identical
/// parameters. Conv and dense weights are fan-in scaled normals, biases zero,
/// batch-norm scales one.
pub fn init_params<T: Scalar>(config: &ModelConfig, seed: u64) -> Result<ModelParams<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = &config.backbone;
    let visual = config
        .mode
        .uses_visual()
        .then(|| VisualBranch::init(&mut rng, &b.visual, config.visual_in_channels()));
    let audio = config.mode.uses_audio().then(|| AudioBranch::init(&mut rng, &b.audio));
    let width = config.classifier_input_width()?;
    let fusion_norm = (config.mode == Mode::AudioVisual && config.fusion == FusionStrategy::ConcatLn)
        .then(|| LayerNormAffine::identity(width));
    let classifier = ClassifierHead::init(&mut rng, width, config.classifier_hidden, config.n_classes);
    Ok(ModelParams {
        config: config.clone(),
        visual,
        audio,
        fusion_norm,
        classifier,
    })
}

fn missing(modality: &'static str, mode: Mode) -> Error {
    Error::MissingModality {
        modality,
        mode: mode.name(),
    }
}

impl<T: Scalar> ModelParams<T> {
    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    fn check_frames(&self, frames: &Tensor<T>) -> Result<()> {
        let c = &self.config;
        let s = frames.shape();
        if s.len() != 5 || s[1] != 3 || s[2] != c.clip_len || s[3] != c.frame_h || s[4] != c.frame_w {
            bail!(
                Shape,
                "visual_forward",
                "expected B×3×{}×{}×{}, got {:?}",
                c.clip_len,
                c.frame_h,
                c.frame_w,
                s
            );
        }
        Ok(())
    }

    fn check_logmel(&self, logmel: &Tensor<T>) -> Result<()> {
        let s = logmel.shape();
        if s.len() != 4 || s[1] != 1 || s[2] != self.config.mel_bins {
            bail!(Shape, "audio_forward", "expected B×1×{}×F, got {:?}", self.config.mel_bins, s);
        }
        Ok(())
    }

    /// Runs the network. In [`NormMode::Train`] batch statistics are used and
    /// the updated running statistics travel in the pass; apply them with
    /// [`ModelParams::commit`].
    pub fn forward(&self, input: ModelInput<'_, T>, mode: NormMode) -> Result<ForwardPass<T>> {
        let m = self.mode();
        let frames = if m.uses_visual() {
            let f = input.frames.ok_or_else(|| missing("visual", m))?;
            self.check_frames(f)?;
            Some(f)
        } else {
            None
        };
        let logmel = if m.uses_audio() {
            let a = input.logmel.ok_or_else(|| missing("audio", m))?;
            self.check_logmel(a)?;
            Some(a)
        } else {
            None
        };
        if let (Some(f), Some(a)) = (frames, logmel) {
            if f.shape()[0] != a.shape()[0] {
                bail!(Shape, "forward", "batch sizes differ: {} clips, {} spectrograms", f.shape()[0], a.shape()[0]);
            }
        }

        let (f_a, audio_cache) = match (&self.audio, logmel) {
            (Some(branch), Some(x)) => {
                let (f, c) = branch.forward(x, mode)?;
                (Some(f), Some(c))
            }
            _ => (None, None),
        };
        let mut lf = None;
        let (f_v, visual_cache) = match (&self.visual, frames) {
            (Some(branch), Some(x)) => {
                let (f, c) = if self.config.uses_lf() {
                    let fa = f_a.as_ref().expect("audio features present in av mode");
                    let (x4, lc) = lf_inject(x, fa, self.config.lf_normalize)?;
                    lf = Some(lc);
                    branch.forward(&x4, mode)?
                } else {
                    branch.forward(x, mode)?
                };
                (Some(f), Some(c))
            }
            _ => (None, None),
        };

        let mut fuse_cache = None;
        let features = match (f_v, f_a) {
            (Some(v), Some(a)) if !self.config.uses_lf() => {
                let (y, c) = fuse(&v, &a, self.config.fusion, self.fusion_norm.as_ref())?;
                fuse_cache = Some(c);
                y
            }
            (Some(v), _) => v,
            (None, Some(a)) => a,
            (None, None) => unreachable!("every mode uses a branch"),
        };
        let (logits, classifier) = self.classifier.forward(&features)?;
        Ok(ForwardPass {
            logits,
            features,
            mode,
            cache: Cache {
                visual: visual_cache,
                audio: audio_cache,
                fuse: fuse_cache,
                lf,
                classifier,
            },
        })
    }

    /// Gradients of all parameters for the cotangent `grad_logits`.
    pub fn backward(&self, pass: &ForwardPass<T>, grad_logits: &Tensor<T>) -> Result<ModelParams<T>> {
        pass.logits.ensure_same_shape(grad_logits, "backward")?;
        let mut grads = self.zeros_like();
        let c = &pass.cache;
        let g_feat = self.classifier.backward(&c.classifier, grad_logits, &mut grads.classifier)?;

        let (g_v, mut g_a) = match &c.fuse {
            Some(fc) => {
                let g = fuse_backward(fc, self.fusion_norm.as_ref(), &g_feat)?;
                if let (Some(dst), Some(src)) = (grads.fusion_norm.as_mut(), g.affine) {
                    *dst = src;
                }
                (Some(g.visual), Some(g.audio))
            }
            None if self.visual.is_some() => (Some(g_feat), None),
            None => (None, Some(g_feat)),
        };

        if let (Some(branch), Some(vc), Some(g), Some(gv)) =
            (&self.visual, &c.visual, grads.visual.as_mut(), g_v.as_ref())
        {
            let g_in = branch.backward(vc, gv, g, c.lf.is_some())?;
            if let (Some(lc), Some(g_in)) = (&c.lf, g_in) {
                g_a = Some(lf_inject_backward(lc, &g_in)?);
            }
        }
        if let (Some(branch), Some(ac), Some(g), Some(ga)) = (&self.audio, &c.audio, grads.audio.as_mut(), g_a.as_ref())
        {
            branch.backward(ac, ga, g)?;
        }
        Ok(grads)
    }

    /// Stores the running statistics computed by a training-mode pass.
    pub fn commit(&mut self, pass: &ForwardPass<T>) {
        if pass.mode != NormMode::Train {
            return;
        }
        if let (Some(v), Some(c)) = (self.visual.as_mut(), pass.cache.visual.as_ref()) {
            v.commit(c);
        }
        if let (Some(a), Some(c)) = (self.audio.as_mut(), pass.cache.audio.as_ref()) {
            a.commit(c);
        }
    }

    /// Copy with every learnable tensor zeroed.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.params_mut() {
            t.fill(T::zero());
        }
        z
    }

    /// Learnable tensors in a fixed order with dotted names.
    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        if let Some(v) = &self.visual {
            v.collect("visual", &mut out);
        }
        if let Some(a) = &self.audio {
            a.collect("audio", &mut out);
        }
        if let Some(n) = &self.fusion_norm {
            n.collect("fusion.ln", &mut out);
        }
        self.classifier.collect("classifier", &mut out);
        out
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        if let Some(v) = self.visual.as_mut() {
            v.collect_mut("visual", &mut out);
        }
        if let Some(a) = self.audio.as_mut() {
            a.collect_mut("audio", &mut out);
        }
        if let Some(n) = self.fusion_norm.as_mut() {
            n.collect_mut("fusion.ln", &mut out);
        }
        self.classifier.collect_mut("classifier", &mut out);
        out
    }

    /// Batch-norm running statistics in a fixed order.
    pub fn buffers(&self) -> Vec<(String, &RunningStats<T>)> {
        let mut out = Vec::new();
        if let Some(v) = &self.visual {
            v.collect_stats("visual", &mut out);
        }
        if let Some(a) = &self.audio {
            a.collect_stats("audio", &mut out);
        }
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<(String, &mut RunningStats<T>)> {
        let mut out = Vec::new();
        if let Some(v) = self.visual.as_mut() {
            v.collect_stats_mut("visual", &mut out);
        }
        if let Some(a) = self.audio.as_mut() {
            a.collect_stats_mut("audio", &mut out);
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }
}
