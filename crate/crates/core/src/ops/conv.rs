//! 3D convolution (cross-correlation) over `B×C×L×H×W` inputs.
//!
//! Each output element is the bias plus the sum over input channels and the
//! `L×H×W` filter window. Lowered to GEMM through an im2col buffer per batch
//! item.

use alloc::vec;
use alloc::vec::Vec;

use super::gemm::{gemm_nn, gemm_nt, gemm_tn};
use crate::error::{bail, Result};
use crate::tensor::{Scalar, Tensor};

/// Filter bank of a 3D convolution layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv3dKernel<T = f32> {
    /// `out_ch × in_ch × L × H × W`
    pub weights: Tensor<T>,
    /// `out_ch`
    pub bias: Tensor<T>,
    /// Per-axis stride, `[L, H, W]`, each at least 1.
    pub stride: [usize; 3],
    /// Per-axis zero padding, `[L, H, W]`.
    pub padding: [usize; 3],
}

/// Gradients produced by [`conv3d_backward`].
#[derive(Clone, Debug)]
pub struct Conv3dGrads<T = f32> {
    pub input: Option<Tensor<T>>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Conv3dKernel<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>, stride: [usize; 3], padding: [usize; 3]) -> Result<Self> {
        if weights.rank() != 5 {
            bail!(Shape, "Conv3dKernel::new", "weights must be rank 5, got {:?}", weights.shape());
        }
        if bias.shape() != [weights.shape()[0]] {
            bail!(
                Shape,
                "Conv3dKernel::new",
                "bias {:?} does not match {} output channels",
                bias.shape(),
                weights.shape()[0]
            );
        }
        if stride.contains(&0) {
            bail!(Geometry, "Conv3dKernel::new", "stride {:?} has a zero axis", stride);
        }
        Ok(Self {
            weights,
            bias,
            stride,
            padding,
        })
    }

    pub fn zeros(out_ch: usize, in_ch: usize, extent: [usize; 3], stride: [usize; 3], padding: [usize; 3]) -> Self {
        Self::new(
            Tensor::zeros(&[out_ch, in_ch, extent[0], extent[1], extent[2]]),
            Tensor::zeros(&[out_ch]),
            stride,
            padding,
        )
        .expect("valid kernel geometry")
    }

    #[inline]
    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    #[inline]
    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    /// Filter extent `[L, H, W]`.
    #[inline]
    pub fn extent(&self) -> [usize; 3] {
        let s = self.weights.shape();
        [s[2], s[3], s[4]]
    }

    /// Output extent `⌊(in + 2·pad − k)/stride⌋ + 1` per axis.
    pub fn output_extent(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        let k = self.extent();
        let mut out = [0; 3];
        for a in 0..3 {
            let padded = input[a] + 2 * self.padding[a];
            if padded < k[a] {
                bail!(
                    Geometry,
                    "conv3d",
                    "axis {}: padded extent {} smaller than filter {}",
                    a,
                    padded,
                    k[a]
                );
            }
            out[a] = (padded - k[a]) / self.stride[a] + 1;
        }
        Ok(out)
    }
}

struct Geometry {
    batch: usize,
    in_ch: usize,
    input: [usize; 3],
    extent: [usize; 3],
    output: [usize; 3],
    stride: [usize; 3],
    padding: [usize; 3],
}

impl Geometry {
    fn of<T: Scalar>(input: &Tensor<T>, kernel: &Conv3dKernel<T>) -> Result<Self> {
        let s = input.shape();
        if s.len() != 5 {
            bail!(Shape, "conv3d", "input must be B×C×L×H×W, got {:?}", s);
        }
        if s[1] != kernel.in_channels() {
            bail!(
                Shape,
                "conv3d",
                "input has {} channels, kernel expects {}",
                s[1],
                kernel.in_channels()
            );
        }
        let extent = [s[2], s[3], s[4]];
        Ok(Self {
            batch: s[0],
            in_ch: s[1],
            input: extent,
            extent: kernel.extent(),
            output: kernel.output_extent(extent)?,
            stride: kernel.stride,
            padding: kernel.padding,
        })
    }

    fn in_volume(&self) -> usize {
        self.input.iter().product()
    }

    fn out_volume(&self) -> usize {
        self.output.iter().product()
    }

    fn patch(&self) -> usize {
        self.in_ch * self.extent.iter().product::<usize>()
    }

    /// Calls `f(row, col, src)` for every im2col cell that reads a real
    /// (non-padding) input element of one batch item.
    #[inline]
    fn for_each_cell(&self, mut f: impl FnMut(usize, usize, usize)) {
        let [il, ih, iw] = self.input;
        let [kl, kh, kw] = self.extent;
        let [ol, oh, ow] = self.output;
        let [sl, sh, sw] = self.stride;
        let [pl, ph, pw] = self.padding;
        let ncol = self.out_volume();
        let mut row = 0;
        for c in 0..self.in_ch {
            for dl in 0..kl {
                for dh in 0..kh {
                    for dw in 0..kw {
                        let base = row * ncol;
                        for zl in 0..ol {
                            let x = (zl * sl + dl) as isize - pl as isize;
                            if x < 0 || x >= il as isize {
                                continue;
                            }
                            for zh in 0..oh {
                                let y = (zh * sh + dh) as isize - ph as isize;
                                if y < 0 || y >= ih as isize {
                                    continue;
                                }
                                let src_row = ((c * il + x as usize) * ih + y as usize) * iw;
                                let col_row = base + (zl * oh + zh) * ow;
                                for zw in 0..ow {
                                    let z = (zw * sw + dw) as isize - pw as isize;
                                    if z < 0 || z >= iw as isize {
                                        continue;
                                    }
                                    f(row, col_row + zw, src_row + z as usize);
                                }
                            }
                        }
                        row += 1;
                    }
                }
            }
        }
    }

    fn im2col<T: Scalar>(&self, src: &[T], col: &mut [T]) {
        col.iter_mut().for_each(|v| *v = T::zero());
        self.for_each_cell(|_, dst, s| col[dst] = src[s]);
    }

    fn col2im<T: Scalar>(&self, col: &[T], dst: &mut [T]) {
        self.for_each_cell(|_, c, d| dst[d] += col[c]);
    }
}

/// Forward 3D convolution: `B×C×L×H×W` → `B×O×L'×H'×W'`.
pub fn conv3d_forward<T: Scalar>(input: &Tensor<T>, kernel: &Conv3dKernel<T>) -> Result<Tensor<T>> {
    let g = Geometry::of(input, kernel)?;
    let (k, n, o) = (g.patch(), g.out_volume(), kernel.out_channels());
    let mut out = Vec::with_capacity(g.batch * o * n);
    let mut col = vec![T::zero(); k * n];
    let vin = g.in_ch * g.in_volume();
    for b in 0..g.batch {
        g.im2col(&input.data()[b * vin..(b + 1) * vin], &mut col);
        let start = out.len();
        for &bias in kernel.bias.data() {
            out.extend(core::iter::repeat(bias).take(n));
        }
        gemm_nn(&mut out[start..], kernel.weights.data(), &col, o, k, n);
    }
    Tensor::new(&[g.batch, o, g.output[0], g.output[1], g.output[2]], out)
}

/// Analytic gradients of [`conv3d_forward`] w.r.t. input, weights and bias.
pub fn conv3d_backward<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Conv3dKernel<T>,
    grad_out: &Tensor<T>,
) -> Result<Conv3dGrads<T>> {
    conv3d_backward_with(input, kernel, grad_out, true)
}

/// Like [`conv3d_backward`], optionally skipping the input gradient (first
/// layers do not need it).
pub fn conv3d_backward_with<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Conv3dKernel<T>,
    grad_out: &Tensor<T>,
    want_input: bool,
) -> Result<Conv3dGrads<T>> {
    let g = Geometry::of(input, kernel)?;
    let (k, n, o) = (g.patch(), g.out_volume(), kernel.out_channels());
    let expect = [g.batch, o, g.output[0], g.output[1], g.output[2]];
    if grad_out.shape() != expect {
        bail!(
            Shape,
            "conv3d_backward",
            "grad_out {:?} does not match output {:?}",
            grad_out.shape(),
            expect
        );
    }
    let vin = g.in_ch * g.in_volume();
    let mut gw = Tensor::zeros_like(&kernel.weights);
    let mut gb = Tensor::zeros_like(&kernel.bias);
    let mut gin = want_input.then(|| Tensor::zeros_like(input));
    let mut col = vec![T::zero(); k * n];
    let mut gcol = vec![T::zero(); if want_input { k * n } else { 0 }];
    for b in 0..g.batch {
        let go = &grad_out.data()[b * o * n..(b + 1) * o * n];
        for (ch, acc) in gb.data_mut().iter_mut().enumerate() {
            *acc += go[ch * n..(ch + 1) * n].iter().copied().sum::<T>();
        }
        g.im2col(&input.data()[b * vin..(b + 1) * vin], &mut col);
        gemm_nt(gw.data_mut(), go, &col, o, k, n);
        if let Some(gi) = gin.as_mut() {
            gcol.iter_mut().for_each(|v| *v = T::zero());
            gemm_tn(&mut gcol, kernel.weights.data(), go, o, k, n);
            g.col2im(&gcol, &mut gi.data_mut()[b * vin..(b + 1) * vin]);
        }
    }
    Ok(Conv3dGrads {
        input: gin,
        weights: gw,
        bias: gb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_kernel(w: f32, b: f32) -> Conv3dKernel<f32> {
        Conv3dKernel::new(
            Tensor::full(&[1, 1, 1, 1, 1], w),
            Tensor::full(&[1], b),
            [1; 3],
            [0; 3],
        )
        .unwrap()
    }

    #[test]
    fn degenerate_window() {
        let x = Tensor::full(&[1, 1, 1, 1, 1], 3.0f32);
        let y = conv3d_forward(&x, &scalar_kernel(2.0, 0.5)).unwrap();
        assert_eq!(y.data(), &[6.5]);
    }

    #[test]
    fn zero_kernel_yields_bias() {
        let x = Tensor::from_fn(&[2, 3, 4, 4, 4], |i| i as f32 * 0.1);
        let mut k = Conv3dKernel::zeros(2, 3, [2, 3, 3], [1, 2, 1], [1, 1, 0]);
        k.bias = Tensor::full(&[2], -1.25);
        let y = conv3d_forward(&x, &k).unwrap();
        assert!(y.data().iter().all(|&v| v == -1.25));
    }

    #[test]
    fn all_ones_window_sums_to_eight() {
        let x = Tensor::full(&[1, 1, 2, 2, 2], 1.0f32);
        let k = Conv3dKernel::new(Tensor::full(&[1, 1, 2, 2, 2], 1.0), Tensor::zeros(&[1]), [1; 3], [0; 3]).unwrap();
        let y = conv3d_forward(&x, &k).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1, 1]);
        assert_eq!(y.data(), &[8.0]);
    }

    #[test]
    fn shape_and_geometry_errors() {
        let k = Conv3dKernel::<f32>::zeros(1, 2, [3, 3, 3], [1; 3], [0; 3]);
        let wrong_ch = Tensor::zeros(&[1, 3, 4, 4, 4]);
        assert!(matches!(conv3d_forward(&wrong_ch, &k), Err(crate::Error::Shape { .. })));
        let too_small = Tensor::zeros(&[1, 2, 2, 4, 4]);
        assert!(matches!(conv3d_forward(&too_small, &k), Err(crate::Error::Geometry { .. })));
        let x = Tensor::zeros(&[1, 2, 3, 3, 3]);
        let bad_grad = Tensor::zeros(&[1, 1, 2, 1, 1]);
        assert!(conv3d_backward(&x, &k, &bad_grad).is_err());
    }

    #[test]
    fn scalar_chain_rule() {
        let x = Tensor::full(&[1, 1, 1, 1, 1], 3.0f32);
        let k = scalar_kernel(2.0, 0.5);
        let g = conv3d_backward(&x, &k, &Tensor::full(&[1, 1, 1, 1, 1], 0.7)).unwrap();
        assert_eq!(g.input.unwrap().data(), &[1.4]);
        assert!((g.weights.data()[0] - 2.1).abs() < 1e-6);
        assert_eq!(g.bias.data(), &[0.7]);
    }

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let x = Tensor::from_fn(&[1, 2, 3, 4, 4], |i| (i as f32).sin());
        let k = Conv3dKernel::new(
            Tensor::from_fn(&[2, 2, 2, 2, 2], |i| (i as f32).cos()),
            Tensor::full(&[2], 0.3),
            [1; 3],
            [1; 3],
        )
        .unwrap();
        let y = conv3d_forward(&x, &k).unwrap();
        let g = conv3d_backward(&x, &k, &Tensor::zeros_like(&y)).unwrap();
        assert!(g.input.unwrap().data().iter().all(|&v| v == 0.0));
        assert!(g.weights.data().iter().all(|&v| v == 0.0));
        assert!(g.bias.data().iter().all(|&v| v == 0.0));
    }
}
