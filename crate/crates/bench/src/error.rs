use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] gam_core::Error),
}

impl BenchError {
    /// Process exit code: 2 for configuration or input problems, 3 for I/O,
    /// 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            BenchError::Config(_) | BenchError::Parse { .. } => 2,
            BenchError::Io { .. } => 3,
            BenchError::Core(_) => 1,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        BenchError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn parse(path: &Path, err: impl std::fmt::Display) -> Self {
        BenchError::Parse { path: path.to_path_buf(), message: err.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
