//! Building blocks shared by the branches: conv + batch norm, the residual
//! basic block and a dense layer.

#[allow(unused_imports)]
use num_traits::Float as _;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::ops::{
    batch_norm3d_backward, batch_norm3d_eval, batch_norm3d_train, conv3d_backward_with, conv3d_forward,
    linear_backward, linear_forward, relu, relu_backward, BatchNormCache, Conv3dKernel, NormMode, RunningStats,
    NORM_EPS,
};
use crate::tensor::{lit, Scalar, Tensor};

/// Momentum of running-statistic updates.
pub const BN_MOMENTUM: f64 = 0.1;

pub(crate) type NamedRef<'a, T> = (String, &'a Tensor<T>);
pub(crate) type NamedMut<'a, T> = (String, &'a mut Tensor<T>);

/// Gaussian tensor with `std = gain·sqrt(1/fan_in)`.
pub(crate) fn fan_in_normal<T: Scalar, R: Rng>(rng: &mut R, shape: &[usize], fan_in: usize, gain: f64) -> Tensor<T> {
    let std = gain / (fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| {
        let z: f64 = rng.sample(StandardNormal);
        T::from_f64(z * std)
    })
}

/// He-normal gain for ReLU networks.
pub(crate) const HE_GAIN: f64 = core::f64::consts::SQRT_2;

/// 3D convolution followed by batch normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvBn<T = f32> {
    pub conv: Conv3dKernel<T>,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running: RunningStats<T>,
}

#[derive(Clone, Debug)]
pub struct ConvBnCache<T> {
    input: Tensor<T>,
    bn: BatchNormCache<T>,
    /// Updated running statistics of a training pass.
    stats: Option<RunningStats<T>>,
}

impl<T: Scalar> ConvBn<T> {
    pub fn init<R: Rng>(
        rng: &mut R,
        in_ch: usize,
        out_ch: usize,
        extent: [usize; 3],
        stride: [usize; 3],
        padding: [usize; 3],
    ) -> Self {
        let fan_in = in_ch * extent.iter().product::<usize>();
        let weights = fan_in_normal(rng, &[out_ch, in_ch, extent[0], extent[1], extent[2]], fan_in, HE_GAIN);
        let conv = Conv3dKernel::new(weights, Tensor::zeros(&[out_ch]), stride, padding).expect("valid conv geometry");
        Self {
            conv,
            gamma: Tensor::full(&[out_ch], T::one()),
            beta: Tensor::zeros(&[out_ch]),
            running: RunningStats::new(out_ch),
        }
    }

    pub fn forward(&self, x: &Tensor<T>, mode: NormMode) -> Result<(Tensor<T>, ConvBnCache<T>)> {
        let z = conv3d_forward(x, &self.conv)?;
        let eps = lit(NORM_EPS);
        let (y, bn, stats) = match mode {
            NormMode::Train => {
                let mut stats = self.running.clone();
                let (y, bn) = batch_norm3d_train(&z, &self.gamma, &self.beta, &mut stats, lit(BN_MOMENTUM), eps)?;
                (y, bn, Some(stats))
            }
            NormMode::Eval => {
                let (y, bn) = batch_norm3d_eval(&z, &self.gamma, &self.beta, &self.running, eps)?;
                (y, bn, None)
            }
        };
        Ok((
            y,
            ConvBnCache {
                input: x.clone(),
                bn,
                stats,
            },
        ))
    }

    /// Accumulates parameter gradients into `grads`; returns the input
    /// gradient when `want_input`.
    pub fn backward(
        &self,
        cache: &ConvBnCache<T>,
        grad_out: &Tensor<T>,
        grads: &mut Self,
        want_input: bool,
    ) -> Result<Option<Tensor<T>>> {
        let (gz, gg, gb) = batch_norm3d_backward(&cache.bn, &self.gamma, grad_out)?;
        grads.gamma.add_assign(&gg)?;
        grads.beta.add_assign(&gb)?;
        let g = conv3d_backward_with(&cache.input, &self.conv, &gz, want_input)?;
        grads.conv.weights.add_assign(&g.weights)?;
        grads.conv.bias.add_assign(&g.bias)?;
        Ok(g.input)
    }

    pub fn commit(&mut self, cache: &ConvBnCache<T>) {
        if let Some(s) = &cache.stats {
            self.running = s.clone();
        }
    }

    pub(crate) fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<NamedRef<'a, T>>) {
        out.push((format!("{prefix}.conv.weight"), &self.conv.weights));
        out.push((format!("{prefix}.conv.bias"), &self.conv.bias));
        out.push((format!("{prefix}.bn.gamma"), &self.gamma));
        out.push((format!("{prefix}.bn.beta"), &self.beta));
    }

    pub(crate) fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<NamedMut<'a, T>>) {
        out.push((format!("{prefix}.conv.weight"), &mut self.conv.weights));
        out.push((format!("{prefix}.conv.bias"), &mut self.conv.bias));
        out.push((format!("{prefix}.bn.gamma"), &mut self.gamma));
        out.push((format!("{prefix}.bn.beta"), &mut self.beta));
    }

    pub(crate) fn collect_stats<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a RunningStats<T>)>) {
        out.push((format!("{prefix}.bn"), &self.running));
    }

    pub(crate) fn collect_stats_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut RunningStats<T>)>) {
        out.push((format!("{prefix}.bn"), &mut self.running));
    }
}

/// Residual basic block: `relu(bn(conv(relu(bn(conv(x))))) + shortcut(x))`.
/// The shortcut is a strided 1×1×1 conv + BN when the shape changes.
#[derive(Clone, Debug, PartialEq)]
pub struct BasicBlock<T = f32> {
    pub conv1: ConvBn<T>,
    pub conv2: ConvBn<T>,
    pub shortcut: Option<ConvBn<T>>,
}

#[derive(Clone, Debug)]
pub struct BasicBlockCache<T> {
    c1: ConvBnCache<T>,
    h1_pre: Tensor<T>,
    c2: ConvBnCache<T>,
    sc: Option<ConvBnCache<T>>,
    sum: Tensor<T>,
}

impl<T: Scalar> BasicBlock<T> {
    pub fn init<R: Rng>(rng: &mut R, in_ch: usize, out_ch: usize, stride: usize) -> Self {
        let s = [stride; 3];
        let conv1 = ConvBn::init(rng, in_ch, out_ch, [3; 3], s, [1; 3]);
        let conv2 = ConvBn::init(rng, out_ch, out_ch, [3; 3], [1; 3], [1; 3]);
        let shortcut = (stride != 1 || in_ch != out_ch).then(|| ConvBn::init(rng, in_ch, out_ch, [1; 3], s, [0; 3]));
        Self { conv1, conv2, shortcut }
    }

    pub fn forward(&self, x: &Tensor<T>, mode: NormMode) -> Result<(Tensor<T>, BasicBlockCache<T>)> {
        let (h1_pre, c1) = self.conv1.forward(x, mode)?;
        let (h2, c2) = self.conv2.forward(&relu(&h1_pre), mode)?;
        let (skip, sc) = match &self.shortcut {
            Some(layer) => {
                let (s, c) = layer.forward(x, mode)?;
                (s, Some(c))
            }
            None => (x.clone(), None),
        };
        let sum = h2.add(&skip)?;
        let y = relu(&sum);
        Ok((y, BasicBlockCache { c1, h1_pre, c2, sc, sum }))
    }

    pub fn backward(
        &self,
        cache: &BasicBlockCache<T>,
        grad_out: &Tensor<T>,
        grads: &mut Self,
        want_input: bool,
    ) -> Result<Option<Tensor<T>>> {
        let g_sum = relu_backward(&cache.sum, grad_out)?;
        let g_h1 = self
            .conv2
            .backward(&cache.c2, &g_sum, &mut grads.conv2, true)?
            .expect("input gradient requested");
        let g_h1_pre = relu_backward(&cache.h1_pre, &g_h1)?;
        let g_main = self.conv1.backward(&cache.c1, &g_h1_pre, &mut grads.conv1, want_input)?;
        let g_skip = match (&self.shortcut, &cache.sc, grads.shortcut.as_mut()) {
            (Some(layer), Some(c), Some(g)) => layer.backward(c, &g_sum, g, want_input)?,
            _ => want_input.then(|| g_sum.clone()),
        };
        Ok(match (g_main, g_skip) {
            (Some(mut a), Some(b)) => {
                a.add_assign(&b)?;
                Some(a)
            }
            _ => None,
        })
    }

    pub fn commit(&mut self, cache: &BasicBlockCache<T>) {
        self.conv1.commit(&cache.c1);
        self.conv2.commit(&cache.c2);
        if let (Some(l), Some(c)) = (self.shortcut.as_mut(), cache.sc.as_ref()) {
            l.commit(c);
        }
    }

    pub(crate) fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<NamedRef<'a, T>>) {
        self.conv1.collect(&format!("{prefix}.conv1"), out);
        self.conv2.collect(&format!("{prefix}.conv2"), out);
        if let Some(s) = &self.shortcut {
            s.collect(&format!("{prefix}.shortcut"), out);
        }
    }

    pub(crate) fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<NamedMut<'a, T>>) {
        self.conv1.collect_mut(&format!("{prefix}.conv1"), out);
        self.conv2.collect_mut(&format!("{prefix}.conv2"), out);
        if let Some(s) = self.shortcut.as_mut() {
            s.collect_mut(&format!("{prefix}.shortcut"), out);
        }
    }

    pub(crate) fn collect_stats<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a RunningStats<T>)>) {
        self.conv1.collect_stats(&format!("{prefix}.conv1"), out);
        self.conv2.collect_stats(&format!("{prefix}.conv2"), out);
        if let Some(s) = &self.shortcut {
            s.collect_stats(&format!("{prefix}.shortcut"), out);
        }
    }

    pub(crate) fn collect_stats_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut RunningStats<T>)>) {
        self.conv1.collect_stats_mut(&format!("{prefix}.conv1"), out);
        self.conv2.collect_stats_mut(&format!("{prefix}.conv2"), out);
        if let Some(s) = self.shortcut.as_mut() {
            s.collect_stats_mut(&format!("{prefix}.shortcut"), out);
        }
    }
}

/// Dense layer `B×I → B×O`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T = f32> {
    /// `O×I`
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn init<R: Rng>(rng: &mut R, inputs: usize, outputs: usize, gain: f64) -> Self {
        Self {
            weights: fan_in_normal(rng, &[outputs, inputs], inputs, gain),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        linear_forward(x, &self.weights, &self.bias)
    }

    pub fn backward(&self, x: &Tensor<T>, grad_out: &Tensor<T>, grads: &mut Self) -> Result<Tensor<T>> {
        let (gx, gw, gb) = linear_backward(x, &self.weights, grad_out)?;
        grads.weights.add_assign(&gw)?;
        grads.bias.add_assign(&gb)?;
        Ok(gx)
    }

    pub(crate) fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<NamedRef<'a, T>>) {
        out.push((format!("{prefix}.weight"), &self.weights));
        out.push((format!("{prefix}.bias"), &self.bias));
    }

    pub(crate) fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<NamedMut<'a, T>>) {
        out.push((format!("{prefix}.weight"), &mut self.weights));
        out.push((format!("{prefix}.bias"), &mut self.bias));
    }
}
