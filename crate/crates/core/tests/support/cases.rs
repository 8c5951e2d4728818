//! Finite-difference gradient checks of every differentiable kernel. Each
//! case draws a random shape from its seed and returns the worst relative
//! error over all inputs of the op.

use avfuse_core::fusion::{fuse, fuse_backward, lf_inject, lf_inject_backward, FusionStrategy, LayerNormAffine};
use avfuse_core::ops::*;
use avfuse_core::Tensor;
use rand::Rng;

use super::fd::{dot, numeric_grad, rel_err};
use super::{rng, signed_away_from_zero, uniform};

pub type Case = fn(u64) -> f64;

pub const OP_CASES: &[(&str, Case)] = &[
    ("conv3d", conv3d),
    ("linear", linear),
    ("relu", relu_case),
    ("layer_norm", layer_norm),
    ("batch_norm_train", batch_norm_train),
    ("batch_norm_eval", batch_norm_eval),
    ("global_avg_pool", gap),
    ("softmax_cross_entropy", cross_entropy),
    ("outer_product", outer),
    ("bilinear_resize", resize),
    ("concat", concat_case),
    ("lf_inject", lf),
    ("fuse", fuse_case),
];

fn check(x: &Tensor<f64>, analytic: &Tensor<f64>, f: impl FnMut(&Tensor<f64>) -> f64) -> f64 {
    let n = numeric_grad(x, f);
    rel_err(analytic.data(), n.data())
}

pub fn conv3d(seed: u64) -> f64 {
    let mut r = rng(seed);
    let b = r.gen_range(1..=2);
    let ci = r.gen_range(1..=3);
    let co = r.gen_range(1..=3);
    let pad: [usize; 3] = core::array::from_fn(|_| r.gen_range(0..=1));
    let stride: [usize; 3] = core::array::from_fn(|_| r.gen_range(1..=2));
    let dims: [usize; 3] = core::array::from_fn(|_| r.gen_range(2..=4));
    let k: [usize; 3] = core::array::from_fn(|a| r.gen_range(1..=3.min(dims[a] + 2 * pad[a])));
    let x = uniform(&mut r, &[b, ci, dims[0], dims[1], dims[2]], -1.0, 1.0);
    let w = uniform(&mut r, &[co, ci, k[0], k[1], k[2]], -1.0, 1.0);
    let bias = uniform(&mut r, &[co], -1.0, 1.0);
    let kern = Conv3dKernel::new(w.clone(), bias.clone(), stride, pad).unwrap();
    let y = conv3d_forward(&x, &kern).unwrap();
    let rr = uniform(&mut r, y.shape(), -1.0, 1.0);
    let g = conv3d_backward(&x, &kern, &rr).unwrap();
    let loss_x = |t: &Tensor<f64>| dot(&rr, &conv3d_forward(t, &kern).unwrap());
    let loss_w = |t: &Tensor<f64>| {
        let k2 = Conv3dKernel::new(t.clone(), bias.clone(), stride, pad).unwrap();
        dot(&rr, &conv3d_forward(&x, &k2).unwrap())
    };
    let loss_b = |t: &Tensor<f64>| {
        let k2 = Conv3dKernel::new(w.clone(), t.clone(), stride, pad).unwrap();
        dot(&rr, &conv3d_forward(&x, &k2).unwrap())
    };
    check(&x, g.input.as_ref().unwrap(), loss_x)
        .max(check(&w, &g.weights, loss_w))
        .max(check(&bias, &g.bias, loss_b))
}

pub fn linear(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (b, i, o) = (r.gen_range(1..=4), r.gen_range(1..=6), r.gen_range(1..=6));
    let x = uniform(&mut r, &[b, i], -1.0, 1.0);
    let w = uniform(&mut r, &[o, i], -1.0, 1.0);
    let bias = uniform(&mut r, &[o], -1.0, 1.0);
    let rr = uniform(&mut r, &[b, o], -1.0, 1.0);
    let (gx, gw, gb) = linear_backward(&x, &w, &rr).unwrap();
    check(&x, &gx, |t| dot(&rr, &linear_forward(t, &w, &bias).unwrap()))
        .max(check(&w, &gw, |t| dot(&rr, &linear_forward(&x, t, &bias).unwrap())))
        .max(check(&bias, &gb, |t| dot(&rr, &linear_forward(&x, &w, t).unwrap())))
}

pub fn relu_case(seed: u64) -> f64 {
    let mut r = rng(seed);
    let shape = [r.gen_range(1..=3), r.gen_range(1..=5), r.gen_range(1..=5)];
    // Keep inputs clear of the kink so the step never crosses it.
    let x = signed_away_from_zero(&mut r, &shape, 0.01, 1.0);
    let rr = uniform(&mut r, &shape, -1.0, 1.0);
    let gx = relu_backward(&x, &rr).unwrap();
    check(&x, &gx, |t| dot(&rr, &relu(t)))
}

pub fn layer_norm(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (b, d) = (r.gen_range(1..=4), r.gen_range(2..=8));
    let x = uniform(&mut r, &[b, d], -2.0, 2.0);
    let gamma = uniform(&mut r, &[d], 0.5, 1.5);
    let beta = uniform(&mut r, &[d], -0.5, 0.5);
    let rr = uniform(&mut r, &[b, d], -1.0, 1.0);
    let (_, cache) = layer_norm_forward(&x, &gamma, &beta, NORM_EPS).unwrap();
    let (gx, gg, gb) = layer_norm_backward(&cache, &gamma, &rr).unwrap();
    let f = |x: &Tensor<f64>, g: &Tensor<f64>, be: &Tensor<f64>| {
        dot(&rr, &layer_norm_forward(x, g, be, NORM_EPS).unwrap().0)
    };
    check(&x, &gx, |t| f(t, &gamma, &beta))
        .max(check(&gamma, &gg, |t| f(&x, t, &beta)))
        .max(check(&beta, &gb, |t| f(&x, &gamma, t)))
}

fn bn_shape(r: &mut impl Rng) -> Vec<usize> {
    vec![r.gen_range(2..=3), r.gen_range(1..=3), r.gen_range(1..=3), r.gen_range(1..=3), r.gen_range(1..=3)]
}

pub fn batch_norm_train(seed: u64) -> f64 {
    let mut r = rng(seed);
    let s = bn_shape(&mut r);
    let c = s[1];
    let x = uniform(&mut r, &s, -2.0, 2.0);
    let gamma = uniform(&mut r, &[c], 0.5, 1.5);
    let beta = uniform(&mut r, &[c], -0.5, 0.5);
    let rr = uniform(&mut r, &s, -1.0, 1.0);
    let f = |x: &Tensor<f64>, g: &Tensor<f64>, be: &Tensor<f64>| {
        let mut stats = RunningStats::new(c);
        dot(&rr, &batch_norm3d_train(x, g, be, &mut stats, 0.1, NORM_EPS).unwrap().0)
    };
    let mut stats = RunningStats::new(c);
    let (_, cache) = batch_norm3d_train(&x, &gamma, &beta, &mut stats, 0.1, NORM_EPS).unwrap();
    let (gx, gg, gb) = batch_norm3d_backward(&cache, &gamma, &rr).unwrap();
    check(&x, &gx, |t| f(t, &gamma, &beta))
        .max(check(&gamma, &gg, |t| f(&x, t, &beta)))
        .max(check(&beta, &gb, |t| f(&x, &gamma, t)))
}

pub fn batch_norm_eval(seed: u64) -> f64 {
    let mut r = rng(seed);
    let s = bn_shape(&mut r);
    let c = s[1];
    let x = uniform(&mut r, &s, -2.0, 2.0);
    let gamma = uniform(&mut r, &[c], 0.5, 1.5);
    let beta = uniform(&mut r, &[c], -0.5, 0.5);
    let stats = RunningStats::from_values(uniform(&mut r, &[c], -0.5, 0.5), uniform(&mut r, &[c], 0.5, 2.0)).unwrap();
    let rr = uniform(&mut r, &s, -1.0, 1.0);
    let f = |x: &Tensor<f64>, g: &Tensor<f64>, be: &Tensor<f64>| {
        dot(&rr, &batch_norm3d_eval(x, g, be, &stats, NORM_EPS).unwrap().0)
    };
    let (_, cache) = batch_norm3d_eval(&x, &gamma, &beta, &stats, NORM_EPS).unwrap();
    let (gx, gg, gb) = batch_norm3d_backward(&cache, &gamma, &rr).unwrap();
    check(&x, &gx, |t| f(t, &gamma, &beta))
        .max(check(&gamma, &gg, |t| f(&x, t, &beta)))
        .max(check(&beta, &gb, |t| f(&x, &gamma, t)))
}

pub fn gap(seed: u64) -> f64 {
    let mut r = rng(seed);
    let rank = r.gen_range(3..=5);
    let s: Vec<usize> = (0..rank).map(|_| r.gen_range(1..=4)).collect();
    let x = uniform(&mut r, &s, -1.0, 1.0);
    let rr = uniform(&mut r, &s[..2], -1.0, 1.0);
    let gx = global_avg_pool_backward(&rr, &s).unwrap();
    check(&x, &gx, |t| dot(&rr, &global_avg_pool(t).unwrap()))
}

pub fn cross_entropy(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (b, n) = (r.gen_range(1..=5), r.gen_range(2..=9));
    let x = uniform(&mut r, &[b, n], -3.0, 3.0);
    let labels: Vec<usize> = (0..b).map(|_| r.gen_range(0..n)).collect();
    let (_, g) = softmax_cross_entropy(&x, &labels).unwrap();
    check(&x, &g, |t| softmax_cross_entropy(t, &labels).unwrap().0)
}

pub fn outer(seed: u64) -> f64 {
    let mut r = rng(seed);
    let d = r.gen_range(1..=7);
    let a = uniform(&mut r, &[d], -1.0, 1.0);
    let b = uniform(&mut r, &[d], -1.0, 1.0);
    let rr = uniform(&mut r, &[d, d], -1.0, 1.0);
    let (ga, gb) = outer_product_backward(&a, &b, &rr).unwrap();
    check(&a, &ga, |t| dot(&rr, &outer_product(t, &b).unwrap()))
        .max(check(&b, &gb, |t| dot(&rr, &outer_product(&a, t).unwrap())))
}

pub fn resize(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (c, h, w) = (r.gen_range(1..=2), r.gen_range(1..=6), r.gen_range(1..=6));
    let (oh, ow) = (r.gen_range(1..=9), r.gen_range(1..=9));
    let x = uniform(&mut r, &[c, h, w], -1.0, 1.0);
    let rr = uniform(&mut r, &[c, oh, ow], -1.0, 1.0);
    let gx = bilinear_resize_backward(&rr, h, w).unwrap();
    check(&x, &gx, |t| dot(&rr, &bilinear_resize(t, oh, ow).unwrap()))
}

pub fn concat_case(seed: u64) -> f64 {
    let mut r = rng(seed);
    let axis = r.gen_range(0..3);
    let mut base = [r.gen_range(1..=3), r.gen_range(1..=3), r.gen_range(1..=3)];
    let parts: Vec<Tensor<f64>> = (0..r.gen_range(1..=3))
        .map(|_| {
            base[axis] = r.gen_range(1..=3);
            uniform(&mut r, &base, -1.0, 1.0)
        })
        .collect();
    let sizes: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
    let refs: Vec<&Tensor<f64>> = parts.iter().collect();
    let y = concat(&refs, axis).unwrap();
    let rr = uniform(&mut r, y.shape(), -1.0, 1.0);
    let grads = split(&rr, axis, &sizes).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..parts.len() {
        let f = |t: &Tensor<f64>| {
            let mut rs: Vec<&Tensor<f64>> = parts.iter().collect();
            rs[k] = t;
            dot(&rr, &concat(&rs, axis).unwrap())
        };
        worst = worst.max(check(&parts[k], &grads[k], f));
    }
    worst
}

pub fn lf(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (b, d) = (r.gen_range(1..=2), r.gen_range(2..=6));
    let (t, h, w) = (r.gen_range(1..=3), r.gen_range(1..=5), r.gen_range(1..=5));
    let frames = uniform(&mut r, &[b, 3, t, h, w], 0.0, 1.0);
    let fa = uniform(&mut r, &[b, d], -1.0, 1.0);
    let rr = uniform(&mut r, &[b, 4, t, h, w], -1.0, 1.0);
    let mut worst: f64 = 0.0;
    for normalize in [true, false] {
        let (_, cache) = lf_inject(&frames, &fa, normalize).unwrap();
        let g = lf_inject_backward(&cache, &rr).unwrap();
        worst = worst.max(check(&fa, &g, |x| dot(&rr, &lf_inject(&frames, x, normalize).unwrap().0)));
    }
    worst
}

pub fn fuse_case(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (b, d) = (r.gen_range(1..=3), r.gen_range(2..=6));
    let ca = if r.gen_bool(0.5) { d } else { r.gen_range(1..=6) };
    let fv = uniform(&mut r, &[b, d], -1.0, 1.0);
    let fa = uniform(&mut r, &[b, ca], -1.0, 1.0);
    let mut aff = LayerNormAffine::<f64>::identity(d + ca);
    aff.gamma = uniform(&mut r, &[d + ca], 0.5, 1.5);
    aff.beta = uniform(&mut r, &[d + ca], -0.5, 0.5);
    let mut worst: f64 = 0.0;
    for s in FusionStrategy::ALL {
        if s == FusionStrategy::Lf || (s == FusionStrategy::Add && ca != d) {
            continue;
        }
        let (y, cache) = fuse(&fv, &fa, s, Some(&aff)).unwrap();
        let rr = uniform(&mut r, y.shape(), -1.0, 1.0);
        let g = fuse_backward(&cache, Some(&aff), &rr).unwrap();
        let f = |v: &Tensor<f64>, a: &Tensor<f64>, af: &LayerNormAffine<f64>| dot(&rr, &fuse(v, a, s, Some(af)).unwrap().0);
        worst = worst
            .max(check(&fv, &g.visual, |t| f(t, &fa, &aff)))
            .max(check(&fa, &g.audio, |t| f(&fv, t, &aff)));
        if let Some(ga) = g.affine {
            worst = worst.max(check(&aff.gamma, &ga.gamma, |t| {
                f(&fv, &fa, &LayerNormAffine { gamma: t.clone(), beta: aff.beta.clone() })
            }));
            worst = worst.max(check(&aff.beta, &ga.beta, |t| {
                f(&fv, &fa, &LayerNormAffine { gamma: aff.gamma.clone(), beta: t.clone() })
            }));
        }
    }
    worst
}
