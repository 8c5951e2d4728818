use alloc::string::String;

/// Errors raised by the numeric kernels, networks and training loop.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid geometry in {op}: {detail}")]
    Geometry { op: &'static str, detail: String },

    #[error("index out of range in {op}: {detail}")]
    Index { op: &'static str, detail: String },

    #[error("invalid argument to {op}: {detail}")]
    InvalidArgument { op: &'static str, detail: String },

    #[error("batch-norm running statistics are not initialized")]
    UninitializedStats,

    #[error("non-finite gradient in parameter `{name}`")]
    NonFiniteGradient { name: String },

    #[error("missing {modality} input required by mode {mode}")]
    MissingModality {
        modality: &'static str,
        mode: &'static str,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! bail {
    ($variant:ident, $op:expr, $($fmt:tt)+) => {
        return Err($crate::error::Error::$variant {
            op: $op,
            detail: alloc::format!($($fmt)+),
        })
    };
}
pub(crate) use bail;
