//! Bilinear resize with the align-corners convention: output corner pixels
//! sample input corners exactly.

#[allow(unused_imports)]
use num_traits::Float as _;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::tensor::{lit, Scalar, Tensor};

/// Source taps `(i0, i1, frac)` for each output coordinate.
fn taps<T: Scalar>(src: usize, dst: usize) -> Vec<(usize, usize, T)> {
    (0..dst)
        .map(|i| {
            if dst == 1 || src == 1 {
                return (0, 0, T::zero());
            }
            let pos = i as f64 * (src - 1) as f64 / (dst - 1) as f64;
            let i0 = (pos.floor() as usize).min(src - 1);
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, lit(pos - i0 as f64))
        })
        .collect()
}

fn check(op: &'static str, s: &[usize], out_h: usize, out_w: usize) -> Result<()> {
    if s.len() != 3 {
        bail!(Shape, op, "input must be C×H×W, got {:?}", s);
    }
    if out_h == 0 || out_w == 0 {
        bail!(InvalidArgument, op, "output size {}×{}", out_h, out_w);
    }
    Ok(())
}

pub fn bilinear_resize<T: Scalar>(input: &Tensor<T>, out_h: usize, out_w: usize) -> Result<Tensor<T>> {
    let s = input.shape();
    check("bilinear_resize", s, out_h, out_w)?;
    let (c, h, w) = (s[0], s[1], s[2]);
    if (h, w) == (out_h, out_w) {
        return Ok(input.clone());
    }
    let ty = taps::<T>(h, out_h);
    let tx = taps::<T>(w, out_w);
    let x = input.data();
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        let plane = &x[ch * h * w..(ch + 1) * h * w];
        for &(y0, y1, fy) in &ty {
            for &(x0, x1, fx) in &tx {
                let top = plane[y0 * w + x0] * (T::one() - fx) + plane[y0 * w + x1] * fx;
                let bot = plane[y1 * w + x0] * (T::one() - fx) + plane[y1 * w + x1] * fx;
                out.push(top * (T::one() - fy) + bot * fy);
            }
        }
    }
    Tensor::new(&[c, out_h, out_w], out)
}

/// Adjoint of [`bilinear_resize`]: scatters `C×out_h×out_w` back to `C×in_h×in_w`.
pub fn bilinear_resize_backward<T: Scalar>(grad_out: &Tensor<T>, in_h: usize, in_w: usize) -> Result<Tensor<T>> {
    let s = grad_out.shape();
    check("bilinear_resize_backward", s, in_h, in_w)?;
    let (c, oh, ow) = (s[0], s[1], s[2]);
    if (in_h, in_w) == (oh, ow) {
        return Ok(grad_out.clone());
    }
    let ty = taps::<T>(in_h, oh);
    let tx = taps::<T>(in_w, ow);
    let mut out = Tensor::zeros(&[c, in_h, in_w]);
    let g = grad_out.data();
    for ch in 0..c {
        let plane = &mut out.data_mut()[ch * in_h * in_w..(ch + 1) * in_h * in_w];
        for (yi, &(y0, y1, fy)) in ty.iter().enumerate() {
            for (xi, &(x0, x1, fx)) in tx.iter().enumerate() {
                let gv = g[(ch * oh + yi) * ow + xi];
                plane[y0 * in_w + x0] += gv * (T::one() - fy) * (T::one() - fx);
                plane[y0 * in_w + x1] += gv * (T::one() - fy) * fx;
                plane[y1 * in_w + x0] += gv * fy * (T::one() - fx);
                plane[y1 * in_w + x1] += gv * fy * fx;
            }
        }
    }
    Ok(out)
}
