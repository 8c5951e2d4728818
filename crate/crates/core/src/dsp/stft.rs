use alloc::vec::Vec;
use core::f64::consts::PI;

use super::fft::Fft;
use crate::error::{bail, Result};
use crate::tensor::Tensor;

/// Periodic Hann window, `w[k] = 0.5·(1 − cos(2πk/n))`.
pub fn hann_window(n: usize) -> Result<Tensor<f32>> {
    if n == 0 {
        bail!(InvalidArgument, "hann_window", "length must be at least 1");
    }
    Ok(Tensor::from_fn(&[n], |k| {
        (0.5 * (1.0 - cos(2.0 * PI * k as f64 / n as f64))) as f32
    }))
}

#[inline]
fn cos(x: f64) -> f64 {
    num_traits::Float::cos(x)
}

/// Number of full frames in `n` samples.
pub fn frame_count(n: usize, window_len: usize, hop: usize) -> usize {
    if n < window_len {
        0
    } else {
        1 + (n - window_len) / hop
    }
}

/// Power spectrogram `(window_len/2 + 1) × frames` of Hann-windowed frames.
/// Signals shorter than one window are rejected (callers pad).
pub fn stft_power(samples: &[f32], window_len: usize, hop: usize) -> Result<Tensor<f32>> {
    if window_len == 0 || hop == 0 {
        bail!(InvalidArgument, "stft_power", "window {} and hop {} must be positive", window_len, hop);
    }
    if samples.len() < window_len {
        bail!(
            InvalidArgument,
            "stft_power",
            "{} samples shorter than one {}-sample window",
            samples.len(),
            window_len
        );
    }
    let frames = frame_count(samples.len(), window_len, hop);
    let bins = window_len / 2 + 1;
    let window: Vec<f64> = (0..window_len)
        .map(|k| 0.5 * (1.0 - cos(2.0 * PI * k as f64 / window_len as f64)))
        .collect();
    let fft = Fft::new(window_len);
    let mut out = Tensor::zeros(&[bins, frames]);
    let mut buf = alloc::vec![0.0f64; window_len];
    for f in 0..frames {
        let frame = &samples[f * hop..f * hop + window_len];
        for ((b, &s), &w) in buf.iter_mut().zip(frame).zip(&window) {
            *b = s as f64 * w;
        }
        let spec = fft.forward_real(&buf);
        for (k, c) in spec.iter().take(bins).enumerate() {
            out.data_mut()[k * frames + f] = c.norm_sqr() as f32;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hann_values() {
        let w = hann_window(4).unwrap();
        let expect = [0.0, 0.5, 1.0, 0.5];
        for (a, b) in w.data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-7);
        }
        for n in [1, 3, 17, 400] {
            assert_eq!(hann_window(n).unwrap().data()[0], 0.0);
        }
        for n in [2usize, 8, 64, 400] {
            let s: f64 = hann_window(n).unwrap().data().iter().map(|&v| v as f64).sum();
            assert!((s - n as f64 / 2.0).abs() < 1e-4);
        }
    }

    #[test]
    fn silence_and_dc() {
        let zeros = alloc::vec![0.0f32; 1000];
        let p = stft_power(&zeros, 400, 160).unwrap();
        assert_eq!(p.shape(), &[201, 4]);
        assert!(p.data().iter().all(|&v| v == 0.0));

        let dc = alloc::vec![0.5f32; 1000];
        let p = stft_power(&dc, 400, 160).unwrap();
        let frames = p.shape()[1];
        for f in 0..frames {
            let dc_bin = p.data()[f];
            assert!(dc_bin > 0.0);
            for k in 1..201 {
                // Periodic Hann leaks only into the first neighbour bin.
                let v = p.data()[k * frames + f];
                if k > 1 {
                    assert!(v < 1e-9 * dc_bin, "bin {k} = {v}");
                }
            }
        }
    }

    #[test]
    fn short_signal_rejected() {
        assert!(stft_power(&[0.0; 10], 16, 4).is_err());
    }
}
