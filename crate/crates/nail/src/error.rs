use std::path::PathBuf;

use thiserror::Error;

/// Failures of the command-line layer, grouped by exit code.
#[derive(Debug, Error)]
pub enum NailError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] nail_core::Error),

    #[error("solver diverged: {0}")]
    Diverged(String),
}

impl NailError {
    /// Process exit code: 1 usage or config, 2 data, 3 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            NailError::Config(_) | NailError::Core(nail_core::Error::InvalidParameter(_)) => 1,
            NailError::Io { .. } | NailError::Parse { .. } | NailError::Data(_) | NailError::Core(_) => 2,
            NailError::Diverged(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        NailError::Io { path: path.into(), source }
    }
}

pub type Result<T, E = NailError> = std::result::Result<T, E>;
