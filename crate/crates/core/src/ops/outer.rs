use crate::error::{bail, Result};
use crate::tensor::{Scalar, Tensor};

/// `out[i,j] = a[i]·b[j]` for two equally long vectors.
pub fn outer_product<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.rank() != 1 || a.shape() != b.shape() {
        bail!(Shape, "outer_product", "{:?} ⊗ {:?}", a.shape(), b.shape());
    }
    let d = a.len();
    Ok(Tensor::from_fn(&[d, d], |k| a.data()[k / d] * b.data()[k % d]))
}

/// Returns `(grad_a, grad_b)` for a `D×D` cotangent.
pub fn outer_product_backward<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, grad_out: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
    let d = a.len();
    if a.rank() != 1 || a.shape() != b.shape() || grad_out.shape() != [d, d] {
        bail!(Shape, "outer_product_backward", "{:?} ⊗ {:?}, grad {:?}", a.shape(), b.shape(), grad_out.shape());
    }
    let g = grad_out.data();
    let mut ga = Tensor::zeros(&[d]);
    let mut gb = Tensor::zeros(&[d]);
    for i in 0..d {
        for j in 0..d {
            ga.data_mut()[i] += g[i * d + j] * b.data()[j];
            gb.data_mut()[j] += g[i * d + j] * a.data()[i];
        }
    }
    Ok((ga, gb))
}
