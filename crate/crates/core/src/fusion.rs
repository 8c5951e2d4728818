//! Combining visual and audio features: four feature-level strategies and
//! the LF input-level injection of an audio self-correlation map.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::ops::{
    bilinear_resize, bilinear_resize_backward, concat, layer_norm_backward, layer_norm_forward, outer_product,
    outer_product_backward, split, LayerNormCache, NORM_EPS,
};
use crate::tensor::{lit, Scalar, Tensor};

/// Default audio up-scaling of [`FusionStrategy::ConcatUm`].
pub const DEFAULT_UM_SCALE: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FusionStrategy {
    /// `[f_v ; f_a]`
    Concat,
    /// Layer norm with learnable affine over `[f_v ; f_a]`.
    ConcatLn,
    /// `[f_v ; S·f_a]`
    ConcatUm { scale: f64 },
    /// `f_v + f_a`; needs equal widths.
    Add,
    /// Audio correlation map as a fourth input channel of the visual branch.
    Lf,
}

impl FusionStrategy {
    pub const ALL: [FusionStrategy; 5] = [
        FusionStrategy::Concat,
        FusionStrategy::ConcatLn,
        FusionStrategy::ConcatUm {
            scale: DEFAULT_UM_SCALE,
        },
        FusionStrategy::Add,
        FusionStrategy::Lf,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FusionStrategy::Concat => "concat",
            FusionStrategy::ConcatLn => "concat_ln",
            FusionStrategy::ConcatUm { .. } => "concat_um",
            FusionStrategy::Add => "add",
            FusionStrategy::Lf => "lf",
        }
    }

    /// Parses a strategy name; `concat_um` takes the default scale.
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "concat" => FusionStrategy::Concat,
            "concat_ln" | "concatln" => FusionStrategy::ConcatLn,
            "concat_um" | "concatum" => FusionStrategy::ConcatUm {
                scale: DEFAULT_UM_SCALE,
            },
            "add" => FusionStrategy::Add,
            "lf" => FusionStrategy::Lf,
            _ => bail!(
                InvalidArgument,
                "FusionStrategy::parse",
                "unknown fusion `{}` (concat|concat_ln|concat_um|add|lf)",
                s
            ),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if let FusionStrategy::ConcatUm { scale } = self {
            if !(scale.is_finite() && *scale > 0.0) {
                bail!(InvalidArgument, "FusionStrategy", "up-scale factor must be positive, got {}", scale);
            }
        }
        Ok(())
    }

    /// Width of the fused vector for feature widths `(C_v, C_a)`.
    pub fn fused_width(&self, cv: usize, ca: usize) -> Result<usize> {
        match self {
            FusionStrategy::Concat | FusionStrategy::ConcatLn | FusionStrategy::ConcatUm { .. } => Ok(cv + ca),
            FusionStrategy::Add if cv == ca => Ok(cv),
            FusionStrategy::Add => bail!(Shape, "fuse", "add needs equal widths, got C_v={} C_a={}", cv, ca),
            FusionStrategy::Lf => Ok(cv),
        }
    }
}

/// Learnable affine of the ConcatLN strategy.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerNormAffine<T = f32> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

impl<T: Scalar> LayerNormAffine<T> {
    pub fn identity(width: usize) -> Self {
        Self {
            gamma: Tensor::full(&[width], T::one()),
            beta: Tensor::zeros(&[width]),
        }
    }

    pub(crate) fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        out.push((format!("{prefix}.gamma"), &self.gamma));
        out.push((format!("{prefix}.beta"), &self.beta));
    }

    pub(crate) fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
        out.push((format!("{prefix}.gamma"), &mut self.gamma));
        out.push((format!("{prefix}.beta"), &mut self.beta));
    }
}

#[derive(Clone, Debug)]
pub struct FuseCache<T> {
    strategy: FusionStrategy,
    widths: (usize, usize),
    ln: Option<LayerNormCache<T>>,
}

/// Gradients of a feature-level fusion.
#[derive(Clone, Debug)]
pub struct FuseGrads<T> {
    pub visual: Tensor<T>,
    pub audio: Tensor<T>,
    pub affine: Option<LayerNormAffine<T>>,
}

/// Fuses `B×C_v` and `B×C_a` features. `ConcatLn` requires `affine`.
/// `Lf` is an input-level strategy and is rejected here.
pub fn fuse<T: Scalar>(
    f_v: &Tensor<T>,
    f_a: &Tensor<T>,
    strategy: FusionStrategy,
    affine: Option<&LayerNormAffine<T>>,
) -> Result<(Tensor<T>, FuseCache<T>)> {
    strategy.validate()?;
    if f_v.rank() != 2 || f_a.rank() != 2 || f_v.shape()[0] != f_a.shape()[0] {
        bail!(Shape, "fuse", "features must be B×C with equal B, got {:?} and {:?}", f_v.shape(), f_a.shape());
    }
    let widths = (f_v.shape()[1], f_a.shape()[1]);
    strategy.fused_width(widths.0, widths.1)?;
    let mut ln = None;
    let out = match strategy {
        FusionStrategy::Concat => concat(&[f_v, f_a], 1)?,
        FusionStrategy::ConcatUm { scale } => concat(&[f_v, &f_a.scale(lit(scale))], 1)?,
        FusionStrategy::ConcatLn => {
            let Some(aff) = affine else {
                bail!(InvalidArgument, "fuse", "concat_ln needs layer-norm parameters");
            };
            let (y, c) = layer_norm_forward(&concat(&[f_v, f_a], 1)?, &aff.gamma, &aff.beta, lit(NORM_EPS))?;
            ln = Some(c);
            y
        }
        FusionStrategy::Add => f_v.add(f_a)?,
        FusionStrategy::Lf => return Err(Error::Contract("lf fuses at the input; use lf_inject".into())),
    };
    Ok((out, FuseCache { strategy, widths, ln }))
}

pub fn fuse_backward<T: Scalar>(
    cache: &FuseCache<T>,
    affine: Option<&LayerNormAffine<T>>,
    grad_out: &Tensor<T>,
) -> Result<FuseGrads<T>> {
    let (cv, ca) = cache.widths;
    let halves = |g: &Tensor<T>| -> Result<(Tensor<T>, Tensor<T>)> {
        let mut parts = split(g, 1, &[cv, ca])?;
        let a = parts.pop().expect("two parts");
        let v = parts.pop().expect("two parts");
        Ok((v, a))
    };
    Ok(match cache.strategy {
        FusionStrategy::Concat => {
            let (visual, audio) = halves(grad_out)?;
            FuseGrads {
                visual,
                audio,
                affine: None,
            }
        }
        FusionStrategy::ConcatUm { scale } => {
            let (visual, audio) = halves(grad_out)?;
            FuseGrads {
                visual,
                audio: audio.scale(lit(scale)),
                affine: None,
            }
        }
        FusionStrategy::ConcatLn => {
            let (Some(aff), Some(c)) = (affine, cache.ln.as_ref()) else {
                bail!(InvalidArgument, "fuse_backward", "concat_ln needs layer-norm parameters");
            };
            let (gx, gamma, beta) = layer_norm_backward(c, &aff.gamma, grad_out)?;
            let (visual, audio) = halves(&gx)?;
            FuseGrads {
                visual,
                audio,
                affine: Some(LayerNormAffine { gamma, beta }),
            }
        }
        FusionStrategy::Add => FuseGrads {
            visual: grad_out.clone(),
            audio: grad_out.clone(),
            affine: None,
        },
        FusionStrategy::Lf => return Err(Error::Contract("lf fuses at the input".into())),
    })
}

/// `f·fᵀ` of one feature vector, optionally divided by its largest
/// magnitude (left unchanged when that is zero). Returns the map and the
/// flat index of the normalizing entry.
pub fn correlation_map<T: Scalar>(f: &Tensor<T>, normalize: bool) -> Result<(Tensor<T>, Option<usize>)> {
    let mut m = outer_product(f, f)?;
    if !normalize {
        return Ok((m, None));
    }
    let (p, peak) = m
        .data()
        .iter()
        .enumerate()
        .fold((0, T::zero()), |acc, (i, &v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
    if peak == T::zero() {
        return Ok((m, None));
    }
    let inv = peak.recip();
    for v in m.data_mut() {
        *v *= inv;
    }
    Ok((m, Some(p)))
}

#[derive(Clone, Debug)]
pub struct LfCache<T> {
    features: Tensor<T>,
    /// Per-sample flat index of the normalizing entry.
    peaks: Vec<Option<usize>>,
    normalize: bool,
    frames: usize,
    h: usize,
    w: usize,
}

/// Appends the resized audio correlation map of each sample as an extra
/// channel, identical across all `T` frames: `B×3×T×H×W → B×4×T×H×W`.
pub fn lf_inject<T: Scalar>(frames: &Tensor<T>, f_a: &Tensor<T>, normalize: bool) -> Result<(Tensor<T>, LfCache<T>)> {
    let s = frames.shape();
    if s.len() != 5 || f_a.rank() != 2 || f_a.shape()[0] != s[0] {
        bail!(Shape, "lf_inject", "frames {:?} (want B×C×T×H×W), audio features {:?}", s, f_a.shape());
    }
    let (b, c, t, h, w) = (s[0], s[1], s[2], s[3], s[4]);
    let plane = h * w;
    let per_in = c * t * plane;
    let per_out = (c + 1) * t * plane;
    let mut out = Vec::with_capacity(b * per_out);
    let mut peaks = Vec::with_capacity(b);
    for i in 0..b {
        let f = f_a.select(0, i)?;
        let (m, peak) = correlation_map(&f, normalize)?;
        peaks.push(peak);
        let d = f.len();
        let map = bilinear_resize(&m.reshape(&[1, d, d])?, h, w)?;
        out.extend_from_slice(&frames.data()[i * per_in..(i + 1) * per_in]);
        for _ in 0..t {
            out.extend_from_slice(map.data());
        }
    }
    let cache = LfCache {
        features: f_a.clone(),
        peaks,
        normalize,
        frames: t,
        h,
        w,
    };
    Ok((Tensor::new(&[b, c + 1, t, h, w], out)?, cache))
}

/// Gradient with respect to the audio features, given the cotangent of the
/// injected `B×4×T×H×W` tensor. The correlation channel is the last one.
pub fn lf_inject_backward<T: Scalar>(cache: &LfCache<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, d) = (cache.features.shape()[0], cache.features.shape()[1]);
    let s = grad_out.shape();
    if s.len() != 5 || s[0] != b || s[2] != cache.frames || s[3] != cache.h || s[4] != cache.w {
        bail!(Shape, "lf_inject_backward", "grad {:?} does not match the cached injection", s);
    }
    let plane = cache.h * cache.w;
    let per = s[1] * cache.frames * plane;
    let map_off = (s[1] - 1) * cache.frames * plane;
    let mut grads = Vec::with_capacity(b * d);
    for i in 0..b {
        let base = i * per + map_off;
        let mut g_map = Tensor::zeros(&[1, cache.h, cache.w]);
        for t in 0..cache.frames {
            let src = &grad_out.data()[base + t * plane..base + (t + 1) * plane];
            for (a, &v) in g_map.data_mut().iter_mut().zip(src) {
                *a += v;
            }
        }
        let mut g_m = bilinear_resize_backward(&g_map, d, d)?.reshape(&[d, d])?;
        let f = cache.features.select(0, i)?;
        if let (true, Some(p)) = (cache.normalize, cache.peaks[i]) {
            let raw = outer_product(&f, &f)?;
            let mp = raw.data()[p];
            let inv = mp.abs().recip();
            // y = M / |M_p|
            let dot: T = g_m.data().iter().zip(raw.data()).map(|(&g, &m)| g * m).sum();
            for v in g_m.data_mut() {
                *v *= inv;
            }
            g_m.data_mut()[p] -= mp.signum() * dot * inv * inv;
        }
        let (ga, gb) = outer_product_backward(&f, &f, &g_m)?;
        grads.extend(ga.data().iter().zip(gb.data()).map(|(&x, &y)| x + y));
    }
    Tensor::new(&[b, d], grads)
}
