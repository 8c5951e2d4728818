use std::io;
use std::path::{Path, PathBuf};

/// Failures of the file-facing layer. Validation problems (bad keys, bad
/// values, missing inputs) are separated from failures during a run so the
/// command line can report distinct exit codes.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error(transparent)]
    Core(#[from] avfuse_core::Error),
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    pub fn validation(msg: impl Into<String>) -> Self {
        AppError::Validation(msg.into())
    }

    pub fn format(path: &Path, detail: impl Into<String>) -> Self {
        AppError::Format {
            path: path.to_path_buf(),
            detail: detail.into(),
        }
    }

    /// 1 for validation failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Validation(_) => 1,
            _ => 2,
        }
    }
}

pub(crate) trait IoContext<T> {
    fn at(self, path: &Path) -> AppResult<T>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, path: &Path) -> AppResult<T> {
        self.map_err(|source| AppError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
