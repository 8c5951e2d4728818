use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::tensor::Tensor;

/// `m(f) = 2595·log₁₀(1 + f/700)`
pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * num_traits::Float::log10(1.0 + f / 700.0)
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (num_traits::Float::powf(10.0, m / 2595.0) - 1.0)
}

/// Triangular mel filters `mel_bins × n_fft_bins`.
///
/// Band edges are `mel_bins + 2` points equally spaced in mel between
/// `m(f_min)` and `m(f_max)`; filter `i` rises from edge `i` to edge `i+1`
/// and falls to edge `i+2`, with slopes taken on the mel axis. Spectrogram
/// bins span `0..=sample_rate/2`. The DC bin never contributes.
pub fn mel_filterbank(n_fft_bins: usize, mel_bins: usize, f_min: f64, f_max: f64, sample_rate: u32) -> Result<Tensor<f32>> {
    let nyquist = sample_rate as f64 / 2.0;
    if n_fft_bins < 2 || mel_bins == 0 {
        bail!(InvalidArgument, "mel_filterbank", "{} FFT bins, {} mel bins", n_fft_bins, mel_bins);
    }
    if !(f_min >= 0.0 && f_min < f_max && f_max <= nyquist) {
        bail!(
            InvalidArgument,
            "mel_filterbank",
            "need 0 <= f_min < f_max <= {}, got {}..{}",
            nyquist,
            f_min,
            f_max
        );
    }
    let (lo, hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
    let edges: Vec<f64> = (0..mel_bins + 2)
        .map(|i| lo + (hi - lo) * i as f64 / (mel_bins + 1) as f64)
        .collect();
    let bin_mel: Vec<f64> = (0..n_fft_bins)
        .map(|k| hz_to_mel(nyquist * k as f64 / (n_fft_bins - 1) as f64))
        .collect();
    let mut out = Tensor::zeros(&[mel_bins, n_fft_bins]);
    for m in 0..mel_bins {
        let (l, c, u) = (edges[m], edges[m + 1], edges[m + 2]);
        let row = &mut out.data_mut()[m * n_fft_bins..(m + 1) * n_fft_bins];
        for (k, &bm) in bin_mel.iter().enumerate().skip(1) {
            let w = ((bm - l) / (c - l)).min((u - bm) / (u - c)).max(0.0);
            row[k] = w as f32;
        }
        if row.iter().all(|&w| w == 0.0) {
            bail!(
                InvalidArgument,
                "mel_filterbank",
                "mel filter {} covers no FFT bin; too many mel bins for {} FFT bins",
                m,
                n_fft_bins
            );
        }
    }
    Ok(out)
}
