//! Independent reference implementations used by the test suites.
#![allow(dead_code)]

pub mod cases;
pub mod fd;
pub mod oracles;

use avfuse_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_7e57)
}

pub fn uniform(rng: &mut impl Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(lo..hi))
}

/// Uniform values with magnitude at least `margin`, random sign.
pub fn signed_away_from_zero(rng: &mut impl Rng, shape: &[usize], margin: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let m = rng.gen_range(margin..hi);
        if rng.gen_bool(0.5) {
            m
        } else {
            -m
        }
    })
}
