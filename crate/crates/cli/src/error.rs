use std::path::{Path, PathBuf};

/// Failure of a CLI operation. Config problems exit with 2, everything else
/// with 3.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("sampler error: {0}")]
    Sampler(#[from] afmhyst_core::Error),
    /// An analysis the record's lattice does not support.
    #[error("{0}")]
    Precondition(afmhyst_core::Error),
    #[error("disk error at {}: {source}", path.display())]
    Disk {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error in {}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    pub fn disk(path: &Path, source: std::io::Error) -> Self {
        CliError::Disk {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, message: impl std::fmt::Display) -> Self {
        CliError::Format {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
