//! Layer normalization over feature rows and batch normalization over the
//! channel axis of `B×C×…` tensors.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::tensor::{lit, Scalar, Tensor};

/// Default epsilon of both normalizations.
pub const NORM_EPS: f64 = 1e-5;

/// Saved state of a layer-norm forward pass.
#[derive(Clone, Debug)]
pub struct LayerNormCache<T = f32> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
}

/// Row-wise standardization of `B×D` (population variance, `eps` inside the
/// square root) followed by the `gamma`/`beta` affine map.
pub fn layer_norm_forward<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: T,
) -> Result<(Tensor<T>, LayerNormCache<T>)> {
    let s = input.shape();
    if s.len() != 2 || gamma.shape() != [s[1]] || beta.shape() != [s[1]] {
        bail!(
            Shape,
            "layer_norm",
            "input {:?}, gamma {:?}, beta {:?}",
            s,
            gamma.shape(),
            beta.shape()
        );
    }
    let d = s[1];
    let inv_d: T = lit(1.0 / d as f64);
    let mut xhat = input.clone();
    let mut out = input.clone();
    let mut inv_std = Vec::with_capacity(s[0]);
    for (xr, yr) in xhat.data_mut().chunks_mut(d).zip(out.data_mut().chunks_mut(d)) {
        let mean = xr.iter().copied().sum::<T>() * inv_d;
        let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
        let is = (var + eps).sqrt().recip();
        inv_std.push(is);
        for (j, (xv, yv)) in xr.iter_mut().zip(yr.iter_mut()).enumerate() {
            *xv = (*xv - mean) * is;
            *yv = gamma.data()[j] * *xv + beta.data()[j];
        }
    }
    Ok((out, LayerNormCache { xhat, inv_std }))
}

/// Returns `(grad_input, grad_gamma, grad_beta)`.
pub fn layer_norm_backward<T: Scalar>(
    cache: &LayerNormCache<T>,
    gamma: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    cache.xhat.ensure_same_shape(grad_out, "layer_norm_backward")?;
    let d = cache.xhat.shape()[1];
    let inv_d: T = lit(1.0 / d as f64);
    let mut gx = grad_out.clone();
    let mut gg = Tensor::zeros(&[d]);
    let mut gb = Tensor::zeros(&[d]);
    for (r, (gxr, xr)) in gx.data_mut().chunks_mut(d).zip(cache.xhat.data().chunks(d)).enumerate() {
        let mut mean_g = T::zero();
        let mut mean_gx = T::zero();
        for j in 0..d {
            let gy = gxr[j];
            gg.data_mut()[j] += gy * xr[j];
            gb.data_mut()[j] += gy;
            let gxh = gy * gamma.data()[j];
            mean_g += gxh;
            mean_gx += gxh * xr[j];
        }
        mean_g *= inv_d;
        mean_gx *= inv_d;
        let is = cache.inv_std[r];
        for j in 0..d {
            let gxh = gxr[j] * gamma.data()[j];
            gxr[j] = is * (gxh - mean_g - xr[j] * mean_gx);
        }
    }
    Ok((gx, gg, gb))
}

/// Running mean/variance of a batch-norm layer. Uninitialized until the
/// first training batch.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats<T = f32> {
    pub mean: Tensor<T>,
    pub var: Tensor<T>,
    pub initialized: bool,
}

impl<T: Scalar> RunningStats<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: Tensor::zeros(&[channels]),
            var: Tensor::full(&[channels], T::one()),
            initialized: false,
        }
    }

    pub fn from_values(mean: Tensor<T>, var: Tensor<T>) -> Result<Self> {
        if mean.rank() != 1 || mean.shape() != var.shape() {
            bail!(Shape, "RunningStats", "mean {:?} vs var {:?}", mean.shape(), var.shape());
        }
        Ok(Self {
            mean,
            var,
            initialized: true,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NormMode {
    /// Batch statistics, running statistics updated.
    Train,
    /// Running statistics only.
    Eval,
}

/// Saved state of a batch-norm forward pass.
#[derive(Clone, Debug)]
pub struct BatchNormCache<T = f32> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
    mode: NormMode,
}

fn channel_layout<T: Scalar>(input: &Tensor<T>, gamma: &Tensor<T>, beta: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let s = input.shape();
    if s.len() < 3 {
        bail!(Shape, "batch_norm", "input must be B×C×…, got {:?}", s);
    }
    if gamma.shape() != [s[1]] || beta.shape() != [s[1]] {
        bail!(
            Shape,
            "batch_norm",
            "{} channels, gamma {:?}, beta {:?}",
            s[1],
            gamma.shape(),
            beta.shape()
        );
    }
    Ok((s[0], s[1], s[2..].iter().product()))
}

/// Batch normalization in training mode: statistics per channel over all
/// `B·L·H·W` positions; running statistics move by `momentum` (or are set
/// outright on the first batch). Running variance uses the unbiased estimate.
pub fn batch_norm3d_train<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running: &mut RunningStats<T>,
    momentum: T,
    eps: T,
) -> Result<(Tensor<T>, BatchNormCache<T>)> {
    let (b, c, sp) = channel_layout(input, gamma, beta)?;
    if running.mean.shape() != [c] {
        bail!(Shape, "batch_norm", "running stats for {:?} channels, input has {}", running.mean.shape(), c);
    }
    let count = b * sp;
    let inv_n: T = lit(1.0 / count as f64);
    let mut mean = vec![T::zero(); c];
    let mut var = vec![T::zero(); c];
    let x = input.data();
    for bi in 0..b {
        for ch in 0..c {
            let base = (bi * c + ch) * sp;
            mean[ch] += x[base..base + sp].iter().copied().sum::<T>();
        }
    }
    mean.iter_mut().for_each(|m| *m *= inv_n);
    for bi in 0..b {
        for ch in 0..c {
            let base = (bi * c + ch) * sp;
            let m = mean[ch];
            var[ch] += x[base..base + sp].iter().map(|&v| (v - m) * (v - m)).sum::<T>();
        }
    }
    var.iter_mut().for_each(|v| *v *= inv_n);

    let unbias: T = if count > 1 {
        lit(count as f64 / (count - 1) as f64)
    } else {
        T::one()
    };
    for ch in 0..c {
        let (rm, rv) = (&mut running.mean.data_mut()[ch], var[ch] * unbias);
        if running.initialized {
            *rm = (T::one() - momentum) * *rm + momentum * mean[ch];
        } else {
            *rm = mean[ch];
        }
        let slot = &mut running.var.data_mut()[ch];
        *slot = if running.initialized {
            (T::one() - momentum) * *slot + momentum * rv
        } else {
            rv
        };
    }
    running.initialized = true;

    let inv_std: Vec<T> = var.iter().map(|&v| (v + eps).sqrt().recip()).collect();
    normalize(input, gamma, beta, &mean, inv_std, NormMode::Train, (b, c, sp))
}

/// Batch normalization in evaluation mode using running statistics.
pub fn batch_norm3d_eval<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running: &RunningStats<T>,
    eps: T,
) -> Result<(Tensor<T>, BatchNormCache<T>)> {
    let layout = channel_layout(input, gamma, beta)?;
    if !running.initialized {
        return Err(Error::UninitializedStats);
    }
    if running.mean.shape() != [layout.1] {
        bail!(Shape, "batch_norm", "running stats {:?} for {} channels", running.mean.shape(), layout.1);
    }
    let inv_std = running.var.data().iter().map(|&v| (v + eps).sqrt().recip()).collect();
    normalize(input, gamma, beta, running.mean.data(), inv_std, NormMode::Eval, layout)
}

fn normalize<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    mean: &[T],
    inv_std: Vec<T>,
    mode: NormMode,
    (b, c, sp): (usize, usize, usize),
) -> Result<(Tensor<T>, BatchNormCache<T>)> {
    let mut xhat = input.clone();
    let mut out = input.clone();
    for bi in 0..b {
        for ch in 0..c {
            let base = (bi * c + ch) * sp;
            let (m, is, g, bt) = (mean[ch], inv_std[ch], gamma.data()[ch], beta.data()[ch]);
            for (xv, yv) in xhat.data_mut()[base..base + sp]
                .iter_mut()
                .zip(&mut out.data_mut()[base..base + sp])
            {
                *xv = (*xv - m) * is;
                *yv = g * *xv + bt;
            }
        }
    }
    Ok((out, BatchNormCache { xhat, inv_std, mode }))
}

/// Returns `(grad_input, grad_gamma, grad_beta)`. In training mode the
/// gradient flows through the batch statistics.
pub fn batch_norm3d_backward<T: Scalar>(
    cache: &BatchNormCache<T>,
    gamma: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    cache.xhat.ensure_same_shape(grad_out, "batch_norm_backward")?;
    let s = grad_out.shape();
    let (b, c, sp) = (s[0], s[1], s[2..].iter().product::<usize>());
    let inv_n: T = lit(1.0 / (b * sp) as f64);
    let mut gg = vec![T::zero(); c];
    let mut gb = vec![T::zero(); c];
    let gy = grad_out.data();
    let xh = cache.xhat.data();
    for bi in 0..b {
        for ch in 0..c {
            let base = (bi * c + ch) * sp;
            for i in base..base + sp {
                gg[ch] += gy[i] * xh[i];
                gb[ch] += gy[i];
            }
        }
    }
    let mut gx = grad_out.clone();
    for bi in 0..b {
        for ch in 0..c {
            let base = (bi * c + ch) * sp;
            let scale = gamma.data()[ch] * cache.inv_std[ch];
            let (mg, mgx) = (gb[ch] * inv_n, gg[ch] * inv_n);
            for i in base..base + sp {
                gx.data_mut()[i] = match cache.mode {
                    NormMode::Train => scale * (gy[i] - mg - xh[i] * mgx),
                    NormMode::Eval => scale * gy[i],
                };
            }
        }
    }
    Ok((gx, Tensor::new(&[c], gg)?, Tensor::new(&[c], gb)?))
}
