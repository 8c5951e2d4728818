//! Optimization, the training loop and evaluation.

mod fit;
mod plateau;
mod report;
mod sgd;

pub use fit::{
    ablation_run, batch_loss, evaluate, occlusion_sweep, occlusion_sweep_with, predict, report, train, train_step,
    AblationArm, EpochLog, EvalOptions, Mask, Occlusion, OcclusionRow, Sample, TrainConfig, TrainObserver,
    TrainOutcome,
};
pub use plateau::{Plateau, PlateauConfig};
pub use report::EvalReport;
pub use sgd::{sgd_step, sgd_step_tensors, SgdState};
