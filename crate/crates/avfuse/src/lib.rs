//! File formats, dataset materialization, checkpoints, run configuration
//! and the `avfuse` command line on top of `avfuse-core`.

pub mod avt;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod manifest;
pub mod synthio;
pub mod wav;

pub use error::{AppError, AppResult};

/// Builds the global worker pool, honouring `AVFUSE_THREADS` when set.
/// Safe to call more than once; later calls are no-ops.
pub fn init_threads() -> AppResult<()> {
    let Some(v) = std::env::var_os("AVFUSE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .to_str()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| AppError::validation(format!("AVFUSE_THREADS must be a positive integer, got {v:?}")))?;
    // Fails only if the pool already exists.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
