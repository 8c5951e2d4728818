mod support;

use avfuse_core::ops::{conv3d_forward, Conv3dKernel};
use rand::Rng;
use support::cases::OP_CASES;
use support::oracles::naive_conv3d;

const SEEDS: u64 = 24;
const TOL: f64 = 1e-4;

#[test]
fn every_kernel_matches_finite_differences() {
    for (name, case) in OP_CASES {
        let worst = (0..SEEDS).map(case).fold(0.0, f64::max);
        assert!(worst < TOL, "{name}: relative error {worst:.3e}");
    }
}

#[test]
fn conv3d_matches_nested_loops() {
    for seed in 0..SEEDS {
        let mut r = support::rng(seed);
        let pad: [usize; 3] = core::array::from_fn(|_| r.gen_range(0..=2));
        let stride: [usize; 3] = core::array::from_fn(|_| r.gen_range(1..=2));
        let dims: [usize; 3] = core::array::from_fn(|_| r.gen_range(1..=6));
        let k: [usize; 3] = core::array::from_fn(|a| r.gen_range(1..=3.min(dims[a] + 2 * pad[a])));
        let (b, ci, co) = (r.gen_range(1..=2), r.gen_range(1..=4), r.gen_range(1..=4));
        let x = support::uniform(&mut r, &[b, ci, dims[0], dims[1], dims[2]], -1.0, 1.0);
        let w = support::uniform(&mut r, &[co, ci, k[0], k[1], k[2]], -1.0, 1.0);
        let bias = support::uniform(&mut r, &[co], -1.0, 1.0);
        let want = naive_conv3d(&x, &w, bias.data(), stride, pad);
        let got = conv3d_forward(&x, &Conv3dKernel::new(w, bias, stride, pad).unwrap()).unwrap();
        assert_eq!(got.shape(), want.shape());
        for (a, b) in got.data().iter().zip(want.data()) {
            assert!((a - b).abs() < 1e-6, "seed {seed}: {a} vs {b}");
        }
    }
}
