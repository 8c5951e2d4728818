use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::tensor::{lit, Scalar, Tensor};

/// Row-wise softmax of `B×N` logits, max-subtracted.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    if logits.rank() != 2 {
        bail!(Shape, "softmax", "logits must be B×N, got {:?}", logits.shape());
    }
    let n = logits.shape()[1];
    let mut out = logits.clone();
    for row in out.data_mut().chunks_mut(n) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut z = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        row.iter_mut().for_each(|v| *v /= z);
    }
    Ok(out)
}

/// Mean cross-entropy of `B×N` logits against class indices; returns the
/// loss and `(softmax − onehot)/B`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    if logits.rank() != 2 || logits.shape()[0] != labels.len() {
        bail!(
            Shape,
            "softmax_cross_entropy",
            "logits {:?} for {} labels",
            logits.shape(),
            labels.len()
        );
    }
    let (b, n) = (logits.shape()[0], logits.shape()[1]);
    if let Some(&bad) = labels.iter().find(|&&y| y >= n) {
        bail!(Index, "softmax_cross_entropy", "label {} outside 0..{}", bad, n);
    }
    let inv_b: T = lit(1.0 / b as f64);
    let mut grad = logits.clone();
    let mut losses = Vec::with_capacity(b);
    for (row, &y) in grad.data_mut().chunks_mut(n).zip(labels) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
        losses.push(lse - row[y]);
        for v in row.iter_mut() {
            *v = (*v - lse).exp() * inv_b;
        }
        row[y] -= inv_b;
    }
    Ok((losses.into_iter().sum::<T>() * inv_b, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_n() {
        let logits = Tensor::<f64>::zeros(&[3, 9]);
        let (loss, grad) = softmax_cross_entropy(&logits, &[0, 4, 8]).unwrap();
        assert!((loss - 9f64.ln()).abs() < 1e-12);
        assert!((loss - 2.19722).abs() < 1e-5);
        for row in grad.data().chunks(9) {
            assert!(row.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_logit_gives_zero_loss() {
        let mut logits = Tensor::<f64>::zeros(&[1, 4]);
        logits.data_mut()[2] = 1e4;
        let (loss, _) = softmax_cross_entropy(&logits, &[2]).unwrap();
        assert!(loss.abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_label() {
        let logits = Tensor::<f32>::zeros(&[1, 3]);
        assert!(matches!(softmax_cross_entropy(&logits, &[3]), Err(crate::Error::Index { .. })));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let logits = Tensor::from_fn(&[4, 7], |i| (i as f32 * 1.3).sin() * 20.0);
        let p = softmax(&logits).unwrap();
        for row in p.data().chunks(7) {
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        }
    }
}
