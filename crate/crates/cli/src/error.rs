use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}:{line}: {message}")]
    ConfigFile { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Core(#[from] deepkm::Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    /// Argument errors and `--help`/`--version` requests.
    #[error(transparent)]
    Clap(#[from] clap::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::ConfigFile { .. } => 2,
            CliError::Core(deepkm::Error::Config(_)) => 2,
            CliError::Clap(e) => e.exit_code(),
            _ => 1,
        }
    }
}
