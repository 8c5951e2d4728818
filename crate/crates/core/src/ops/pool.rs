use crate::error::{bail, Result};
use crate::tensor::{lit, Scalar, Tensor};

/// Global average pooling: mean over every axis after batch and channel,
/// `B×C×…` → `B×C`.
pub fn global_avg_pool<T: Scalar>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let s = input.shape();
    if s.len() < 3 {
        bail!(Shape, "global_avg_pool", "need B×C plus at least one trailing axis, got {:?}", s);
    }
    let sp: usize = s[2..].iter().product();
    let inv: T = lit(1.0 / sp as f64);
    let data = input.data().chunks(sp).map(|c| c.iter().copied().sum::<T>() * inv).collect();
    Tensor::new(&[s[0], s[1]], data)
}

/// Spreads each pooled gradient evenly over its window.
pub fn global_avg_pool_backward<T: Scalar>(grad_out: &Tensor<T>, input_shape: &[usize]) -> Result<Tensor<T>> {
    if input_shape.len() < 3 || grad_out.shape() != &input_shape[..2] {
        bail!(
            Shape,
            "global_avg_pool_backward",
            "grad {:?} for input {:?}",
            grad_out.shape(),
            input_shape
        );
    }
    let sp: usize = input_shape[2..].iter().product();
    let inv: T = lit(1.0 / sp as f64);
    let mut out = Tensor::zeros(input_shape);
    for (chunk, &g) in out.data_mut().chunks_mut(sp).zip(grad_out.data()) {
        chunk.iter_mut().for_each(|v| *v = g * inv);
    }
    Ok(out)
}
