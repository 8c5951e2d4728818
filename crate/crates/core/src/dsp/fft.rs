//! Mixed-radix Cooley–Tukey FFT for any length. Prime factors are handled
//! by direct butterflies, so lengths built from small primes (e.g. the
//! 400-sample analysis window) stay fast.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

/// Precomputed plan for a forward DFT of one length.
#[derive(Clone, Debug)]
pub struct Fft {
    n: usize,
    factors: Vec<usize>,
    /// `exp(-2πik/n)` for `k < n`
    twiddles: Vec<Complex64>,
}

fn factorize(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 2;
    while n > 1 {
        if p * p > n {
            out.push(n);
            break;
        }
        while n % p == 0 {
            out.push(p);
            n /= p;
        }
        p += 1;
    }
    out
}

impl Fft {
    /// Panics if `n == 0`.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "FFT length must be positive");
        let twiddles = (0..n)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        Self {
            n,
            factors: factorize(n),
            twiddles,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `X[k] = Σⱼ x[j]·exp(-2πijk/n)`
    pub fn forward(&self, input: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(input.len(), self.n, "input length does not match plan");
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        self.recurse(input, 1, &self.factors, &mut out);
        out
    }

    /// Real input convenience.
    pub fn forward_real(&self, input: &[f64]) -> Vec<Complex64> {
        let buf: Vec<Complex64> = input.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward(&buf)
    }

    fn recurse(&self, input: &[Complex64], stride: usize, factors: &[usize], out: &mut [Complex64]) {
        let n = out.len();
        if n == 1 {
            out[0] = input[0];
            return;
        }
        let p = factors[0];
        let m = n / p;
        for r in 0..p {
            self.recurse(&input[r * stride..], stride * p, &factors[1..], &mut out[r * m..(r + 1) * m]);
        }
        // Twiddle step of the top-level table for a sub-transform of size n.
        let step = self.n / n;
        let mut tmp = vec![Complex64::new(0.0, 0.0); p];
        for k in 0..m {
            for (r, t) in tmp.iter_mut().enumerate() {
                *t = out[r * m + k];
            }
            for q in 0..p {
                let kk = k + q * m;
                let mut acc = tmp[0];
                for (r, &t) in tmp.iter().enumerate().skip(1) {
                    acc += t * self.twiddles[(r * kk % n) * step];
                }
                out[kk] = acc;
            }
        }
    }
}
