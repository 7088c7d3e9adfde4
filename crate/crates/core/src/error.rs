// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record in {path} line {line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    /// Data violates a documented invariant of one of the store types.
    #[error("invalid data: {0}")]
    Invalid(String),

    #[error("non-finite activation at stimulus {stimulus}, layer {layer}, unit {unit}")]
    NonFinite { stimulus: usize, layer: usize, unit: usize },

    /// A caller-supplied argument is outside the operation's domain.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("missing input: {0}")]
    Missing(String),

    /// A statistical procedure could not produce a result.
    #[error("{procedure} failed: {message}")]
    Procedure { procedure: &'static str, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn procedure(procedure: &'static str, message: impl Into<String>) -> Self {
        Error::Procedure { procedure, message: message.into() }
    }

    /// True for errors caused by the statistics rather than the inputs.
    pub fn is_statistical(&self) -> bool {
        matches!(self, Error::Procedure { .. })
    }
}
