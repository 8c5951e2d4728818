use alloc::vec::Vec;

use super::gemm::{gemm_nn, gemm_nt, gemm_tn};
use crate::error::{bail, Result};
use crate::tensor::{Scalar, Tensor};

/// `out[b,o] = bias[o] + Σᵢ weights[o,i]·input[b,i]`
pub fn linear_forward<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, i, o) = check(input, weights, bias)?;
    let mut out = Vec::with_capacity(b * o);
    for _ in 0..b {
        out.extend_from_slice(bias.data());
    }
    gemm_nt(&mut out, input.data(), weights.data(), b, o, i);
    Tensor::new(&[b, o], out)
}

/// Returns `(grad_input, grad_weights, grad_bias)`.
pub fn linear_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let s = input.shape();
    let w = weights.shape();
    if s.len() != 2 || w.len() != 2 || s[1] != w[1] || grad_out.shape() != [s[0], w[0]] {
        bail!(
            Shape,
            "linear_backward",
            "input {:?}, weights {:?}, grad_out {:?}",
            s,
            w,
            grad_out.shape()
        );
    }
    let (b, i, o) = (s[0], s[1], w[0]);
    let mut gi = Tensor::zeros(&[b, i]);
    gemm_nn(gi.data_mut(), grad_out.data(), weights.data(), b, o, i);
    let mut gw = Tensor::zeros(&[o, i]);
    gemm_tn(gw.data_mut(), grad_out.data(), input.data(), b, o, i);
    let mut gb = Tensor::zeros(&[o]);
    for row in grad_out.data().chunks(o) {
        for (acc, &g) in gb.data_mut().iter_mut().zip(row) {
            *acc += g;
        }
    }
    Ok((gi, gw, gb))
}

fn check<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let s = input.shape();
    let w = weights.shape();
    if s.len() != 2 || w.len() != 2 || s[1] != w[1] {
        bail!(Shape, "linear", "input {:?} incompatible with weights {:?}", s, w);
    }
    if bias.shape() != [w[0]] {
        bail!(Shape, "linear", "bias {:?} for {} outputs", bias.shape(), w[0]);
    }
    Ok((s[0], s[1], w[0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_zero_input() {
        let x = Tensor::from_fn(&[2, 3], |i| i as f32 - 2.0);
        let eye = Tensor::from_fn(&[3, 3], |i| if i % 4 == 0 { 1.0 } else { 0.0 });
        assert_eq!(linear_forward(&x, &eye, &Tensor::zeros(&[3])).unwrap(), x);

        let bias = Tensor::from_slice(&[1.0f32, -2.0]).unwrap();
        let w = Tensor::from_fn(&[2, 3], |i| i as f32);
        let y = linear_forward(&Tensor::zeros(&[4, 3]), &w, &bias).unwrap();
        assert_eq!(y.data(), &[1.0, -2.0, 1.0, -2.0, 1.0, -2.0, 1.0, -2.0]);
    }

    #[test]
    fn width_mismatch() {
        let x = Tensor::<f32>::zeros(&[2, 3]);
        assert!(linear_forward(&x, &Tensor::zeros(&[4, 2]), &Tensor::zeros(&[4])).is_err());
        assert!(linear_forward(&x, &Tensor::zeros(&[4, 3]), &Tensor::zeros(&[3])).is_err());
    }
}
