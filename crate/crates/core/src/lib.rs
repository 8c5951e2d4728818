//! Core of the audio-visual event classifier.
//!
//! Everything here is pure computation over in-memory buffers and builds
//! without `std`: tensors and their differentiable kernels, the log-mel
//! front end, the visual/audio/classifier networks, fusion strategies,
//! clip transforms, the SGD training loop and the synthetic dataset
//! generator. File formats and the command line live in the `avfuse` crate.

#![cfg_attr(not(test), no_std)]
extern crate alloc;

pub mod dsp;
pub mod error;
pub mod fusion;
pub mod model;
pub mod ops;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Scalar, Tensor};
