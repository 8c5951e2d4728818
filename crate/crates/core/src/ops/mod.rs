//! Differentiable numeric kernels. Every forward op has an explicit
//! backward companion.

mod activation;
mod concat;
mod conv;
pub(crate) mod gemm;
mod linear;
mod loss;
mod norm;
mod outer;
mod pool;
mod resize;

pub use activation::{relu, relu_backward};
pub use concat::{concat, split};
pub use conv::{conv3d_backward, conv3d_backward_with, conv3d_forward, Conv3dGrads, Conv3dKernel};
pub use linear::{linear_backward, linear_forward};
pub use loss::{softmax, softmax_cross_entropy};
pub use norm::{
    batch_norm3d_backward, batch_norm3d_eval, batch_norm3d_train, layer_norm_backward, layer_norm_forward,
    BatchNormCache, LayerNormCache, NormMode, RunningStats, NORM_EPS,
};
pub use outer::{outer_product, outer_product_backward};
pub use pool::{global_avg_pool, global_avg_pool_backward};
pub use resize::{bilinear_resize, bilinear_resize_backward};
