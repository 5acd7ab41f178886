use std::path::PathBuf;

use thiserror::Error;
use xft_core::XftError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot parse {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error("invalid configuration field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },

    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: XftError,
    },
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.into(), message: err.to_string() }
    }
}

/// Attaches the pipeline stage to a core error.
pub(crate) trait AtStage<T> {
    fn at(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> AtStage<T> for Result<T, XftError> {
    fn at(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
