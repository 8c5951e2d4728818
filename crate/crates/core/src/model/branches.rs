//! Visual and audio feature extractors and the classifier head.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use super::config::{AudioConfig, VisualConfig};
use super::layers::{BasicBlock, BasicBlockCache, ConvBn, ConvBnCache, Dense, NamedMut, NamedRef, HE_GAIN};
use crate::error::{bail, Result};
use crate::ops::{global_avg_pool, global_avg_pool_backward, relu, relu_backward, NormMode, RunningStats};
use crate::tensor::{Scalar, Tensor};

/// Gain of the output layer; small so the initial prediction is close to
/// uniform.
pub const OUTPUT_GAIN: f64 = 0.1;

/// 3D residual network over `B×C×T×H×W` clips, ending in global average
/// pooling to `B×C_v`.
#[derive(Clone, Debug, PartialEq)]
pub struct VisualBranch<T = f32> {
    pub stem: ConvBn<T>,
    pub blocks: Vec<BasicBlock<T>>,
}

#[derive(Clone, Debug)]
pub struct VisualCache<T> {
    stem: ConvBnCache<T>,
    stem_pre: Tensor<T>,
    blocks: Vec<BasicBlockCache<T>>,
    pooled_shape: Vec<usize>,
}

impl<T: Scalar> VisualBranch<T> {
    pub fn init<R: Rng>(rng: &mut R, cfg: &VisualConfig, in_channels: usize) -> Self {
        let stem = ConvBn::init(
            rng,
            in_channels,
            cfg.stem_channels,
            cfg.stem_kernel,
            cfg.stem_stride,
            cfg.stem_padding,
        );
        let mut blocks = Vec::new();
        let mut ch = cfg.stem_channels;
        for ((&w, &n), &s) in cfg.stage_widths.iter().zip(&cfg.stage_blocks).zip(&cfg.stage_strides) {
            for k in 0..n {
                blocks.push(BasicBlock::init(rng, ch, w, if k == 0 { s } else { 1 }));
                ch = w;
            }
        }
        Self { stem, blocks }
    }

    pub fn in_channels(&self) -> usize {
        self.stem.conv.in_channels()
    }

    pub fn feature_dim(&self) -> usize {
        self.blocks.last().map_or(self.stem.conv.out_channels(), |b| b.conv2.conv.out_channels())
    }

    pub fn forward(&self, clip: &Tensor<T>, mode: NormMode) -> Result<(Tensor<T>, VisualCache<T>)> {
        let s = clip.shape();
        if s.len() != 5 || s[1] != self.in_channels() {
            bail!(
                Shape,
                "visual_forward",
                "expected B×{}×T×H×W, got {:?}",
                self.in_channels(),
                s
            );
        }
        let (stem_pre, stem) = self.stem.forward(clip, mode)?;
        let mut x = relu(&stem_pre);
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, c) = b.forward(&x, mode)?;
            blocks.push(c);
            x = y;
        }
        let pooled_shape = x.shape().to_vec();
        let f = global_avg_pool(&x)?;
        Ok((
            f,
            VisualCache {
                stem,
                stem_pre,
                blocks,
                pooled_shape,
            },
        ))
    }

    /// Gradient of the clip is returned only when `want_input` (the LF
    /// strategy needs it for the correlation channel).
    pub fn backward(
        &self,
        cache: &VisualCache<T>,
        grad_features: &Tensor<T>,
        grads: &mut Self,
        want_input: bool,
    ) -> Result<Option<Tensor<T>>> {
        let mut g = global_avg_pool_backward(grad_features, &cache.pooled_shape)?;
        for ((b, c), gb) in self.blocks.iter().zip(&cache.blocks).zip(grads.blocks.iter_mut()).rev() {
            g = b.backward(c, &g, gb, true)?.expect("input gradient requested");
        }
        let g = relu_backward(&cache.stem_pre, &g)?;
        self.stem.backward(&cache.stem, &g, &mut grads.stem, want_input)
    }

    pub fn commit(&mut self, cache: &VisualCache<T>) {
        self.stem.commit(&cache.stem);
        for (b, c) in self.blocks.iter_mut().zip(&cache.blocks) {
            b.commit(c);
        }
    }

    pub(crate) fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<NamedRef<'a, T>>) {
        self.stem.collect(&format!("{prefix}.stem"), out);
        for (i, b) in self.blocks.iter().enumerate() {
            b.collect(&format!("{prefix}.block{i}"), out);
        }
    }

    pub(crate) fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<NamedMut<'a, T>>) {
        self.stem.collect_mut(&format!("{prefix}.stem"), out);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.collect_mut(&format!("{prefix}.block{i}"), out);
        }
    }

    pub(crate) fn collect_stats<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a RunningStats<T>)>) {
        self.stem.collect_stats(&format!("{prefix}.stem"), out);
        for (i, b) in self.blocks.iter().enumerate() {
            b.collect_stats(&format!("{prefix}.block{i}"), out);
        }
    }

    pub(crate) fn collect_stats_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut RunningStats<T>)>) {
        self.stem.collect_stats_mut(&format!("{prefix}.stem"), out);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.collect_stats_mut(&format!("{prefix}.block{i}"), out);
        }
    }
}

/// 2D conv stack over `B×1×M×F` log-mel images, ending in global average
/// pooling to `B×C_a`. Any number of frames `F ≥ 1` is accepted.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioBranch<T = f32> {
    pub layers: Vec<ConvBn<T>>,
}

#[derive(Clone, Debug)]
pub struct AudioCache<T> {
    layers: Vec<(ConvBnCache<T>, Tensor<T>)>,
    pooled_shape: Vec<usize>,
}

impl<T: Scalar> AudioBranch<T> {
    pub fn init<R: Rng>(rng: &mut R, cfg: &AudioConfig) -> Self {
        let mut ch = 1;
        let layers = cfg
            .widths
            .iter()
            .map(|&w| {
                let l = ConvBn::init(rng, ch, w, [1, 3, 3], [1, cfg.stride, cfg.stride], [0, 1, 1]);
                ch = w;
                l
            })
            .collect();
        Self { layers }
    }

    pub fn feature_dim(&self) -> usize {
        self.layers.last().map_or(1, |l| l.conv.out_channels())
    }

    pub fn forward(&self, logmel: &Tensor<T>, mode: NormMode) -> Result<(Tensor<T>, AudioCache<T>)> {
        let s = logmel.shape();
        if s.len() != 4 || s[1] != 1 {
            bail!(Shape, "audio_forward", "expected B×1×M×F, got {:?}", s);
        }
        let mut x = logmel.clone().reshape(&[s[0], 1, 1, s[2], s[3]])?;
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let (pre, c) = l.forward(&x, mode)?;
            x = relu(&pre);
            layers.push((c, pre));
        }
        let pooled_shape = x.shape().to_vec();
        Ok((global_avg_pool(&x)?, AudioCache { layers, pooled_shape }))
    }

    /// Accumulates parameter gradients; the spectrogram gets no gradient.
    pub fn backward(&self, cache: &AudioCache<T>, grad_features: &Tensor<T>, grads: &mut Self) -> Result<()> {
        let mut g = global_avg_pool_backward(grad_features, &cache.pooled_shape)?;
        let n = self.layers.len();
        for (i, ((l, (c, pre)), gl)) in self.layers.iter().zip(&cache.layers).zip(grads.layers.iter_mut()).enumerate().rev() {
            let gp = relu_backward(pre, &g)?;
            match l.backward(c, &gp, gl, i > 0)? {
                Some(gi) => g = gi,
                None => debug_assert!(i == 0 && n > 0),
            }
        }
        Ok(())
    }

    pub fn commit(&mut self, cache: &AudioCache<T>) {
        for (l, (c, _)) in self.layers.iter_mut().zip(&cache.layers) {
            l.commit(c);
        }
    }

    pub(crate) fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<NamedRef<'a, T>>) {
        for (i, l) in self.layers.iter().enumerate() {
            l.collect(&format!("{prefix}.conv{i}"), out);
        }
    }

    pub(crate) fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<NamedMut<'a, T>>) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.collect_mut(&format!("{prefix}.conv{i}"), out);
        }
    }

    pub(crate) fn collect_stats<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a RunningStats<T>)>) {
        for (i, l) in self.layers.iter().enumerate() {
            l.collect_stats(&format!("{prefix}.conv{i}"), out);
        }
    }

    pub(crate) fn collect_stats_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut RunningStats<T>)>) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.collect_stats_mut(&format!("{prefix}.conv{i}"), out);
        }
    }
}

/// Three dense layers `D → h1 → h2 → N` with ReLU between them.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierHead<T = f32> {
    pub fc: [Dense<T>; 3],
}

#[derive(Clone, Debug)]
pub struct ClassifierCache<T> {
    input: Tensor<T>,
    pre: [Tensor<T>; 2],
    hidden: [Tensor<T>; 2],
}

impl<T: Scalar> ClassifierHead<T> {
    pub fn init<R: Rng>(rng: &mut R, inputs: usize, hidden: [usize; 2], classes: usize) -> Self {
        Self {
            fc: [
                Dense::init(rng, inputs, hidden[0], HE_GAIN),
                Dense::init(rng, hidden[0], hidden[1], HE_GAIN),
                Dense::init(rng, hidden[1], classes, OUTPUT_GAIN),
            ],
        }
    }

    pub fn inputs(&self) -> usize {
        self.fc[0].inputs()
    }

    pub fn classes(&self) -> usize {
        self.fc[2].outputs()
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, ClassifierCache<T>)> {
        if x.rank() != 2 || x.shape()[1] != self.inputs() {
            bail!(Shape, "classifier_forward", "expected B×{}, got {:?}", self.inputs(), x.shape());
        }
        let p0 = self.fc[0].forward(x)?;
        let h0 = relu(&p0);
        let p1 = self.fc[1].forward(&h0)?;
        let h1 = relu(&p1);
        let logits = self.fc[2].forward(&h1)?;
        Ok((
            logits,
            ClassifierCache {
                input: x.clone(),
                pre: [p0, p1],
                hidden: [h0, h1],
            },
        ))
    }

    pub fn backward(&self, cache: &ClassifierCache<T>, grad_logits: &Tensor<T>, grads: &mut Self) -> Result<Tensor<T>> {
        let [g0, g1, g2] = &mut grads.fc;
        let gh1 = self.fc[2].backward(&cache.hidden[1], grad_logits, g2)?;
        let gh0 = self.fc[1].backward(&cache.hidden[0], &relu_backward(&cache.pre[1], &gh1)?, g1)?;
        self.fc[0].backward(&cache.input, &relu_backward(&cache.pre[0], &gh0)?, g0)
    }

    pub(crate) fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<NamedRef<'a, T>>) {
        for (i, l) in self.fc.iter().enumerate() {
            l.collect(&format!("{prefix}.fc{i}"), out);
        }
    }

    pub(crate) fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<NamedMut<'a, T>>) {
        for (i, l) in self.fc.iter_mut().enumerate() {
            l.collect_mut(&format!("{prefix}.fc{i}"), out);
        }
    }
}
