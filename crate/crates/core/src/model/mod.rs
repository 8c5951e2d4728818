//! Network definitions: configuration, layers, branches and the assembled
//! model with explicit forward and backward passes.

mod branches;
mod config;
mod layers;
mod net;

pub use branches::{
    AudioBranch, AudioCache, ClassifierCache, ClassifierHead, VisualBranch, VisualCache, OUTPUT_GAIN,
};
pub use config::{AudioConfig, BackboneConfig, Mode, ModelConfig, VisualConfig};
pub use layers::{BasicBlock, BasicBlockCache, ConvBn, ConvBnCache, Dense, BN_MOMENTUM};
pub use net::{init_params, ForwardPass, ModelInput, ModelParams};
