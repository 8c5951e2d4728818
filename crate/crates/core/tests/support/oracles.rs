//! Direct-definition references: nested-loop convolution and the O(n²) DFT.

use avfuse_core::Tensor;

/// Nested-loop 3D convolution over `B×I×L×H×W` with zero padding.
pub fn naive_conv3d(
    x: &Tensor<f64>,
    w: &Tensor<f64>,
    bias: &[f64],
    stride: [usize; 3],
    pad: [usize; 3],
) -> Tensor<f64> {
    let xs = x.shape();
    let ws = w.shape();
    let (b, ci, co) = (xs[0], xs[1], ws[0]);
    let k = [ws[2], ws[3], ws[4]];
    let outd: Vec<usize> = (0..3).map(|a| (xs[2 + a] + 2 * pad[a] - k[a]) / stride[a] + 1).collect();
    let mut out = Tensor::zeros(&[b, co, outd[0], outd[1], outd[2]]);
    for n in 0..b {
        for o in 0..co {
            for ol in 0..outd[0] {
                for oh in 0..outd[1] {
                    for ow in 0..outd[2] {
                        let mut acc = bias[o];
                        for i in 0..ci {
                            for kl in 0..k[0] {
                                for kh in 0..k[1] {
                                    for kw in 0..k[2] {
                                        let l = (ol * stride[0] + kl) as isize - pad[0] as isize;
                                        let h = (oh * stride[1] + kh) as isize - pad[1] as isize;
                                        let ww = (ow * stride[2] + kw) as isize - pad[2] as isize;
                                        if l < 0
                                            || h < 0
                                            || ww < 0
                                            || l >= xs[2] as isize
                                            || h >= xs[3] as isize
                                            || ww >= xs[4] as isize
                                        {
                                            continue;
                                        }
                                        let xv = x.get(&[n, i, l as usize, h as usize, ww as usize]).unwrap();
                                        let wv = w.get(&[o, i, kl, kh, kw]).unwrap();
                                        acc += xv * wv;
                                    }
                                }
                            }
                        }
                        out.set(&[n, o, ol, oh, ow], acc).unwrap();
                    }
                }
            }
        }
    }
    out
}

/// `|X_k|²` for `k = 0..=n/2` straight from the DFT sum.
pub fn dft_power(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in frame.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            re * re + im * im
        })
        .collect()
}

/// Full complex DFT.
pub fn dft(x: &[num_complex::Complex64]) -> Vec<num_complex::Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| {
                    let a = -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                    v * num_complex::Complex64::new(a.cos(), a.sin())
                })
                .sum()
        })
        .collect()
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Power spectrogram (bins × frames) by framing, windowing and the DFT sum.
pub fn stft_power(samples: &[f32], window: usize, hop: usize) -> Vec<Vec<f64>> {
    let w = hann(window);
    let frames = if samples.len() < window { 0 } else { 1 + (samples.len() - window) / hop };
    (0..frames)
        .map(|f| {
            let frame: Vec<f64> = (0..window).map(|i| samples[f * hop + i] as f64 * w[i]).collect();
            dft_power(&frame)
        })
        .collect()
}
