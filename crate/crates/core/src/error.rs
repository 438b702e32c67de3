//! Error type shared across the toolkit.

use std::io;
use std::path::Path;

use thiserror::Error;

/// Unified error for parsing, validation and file handling.
///
/// `Io` is kept separate from the validation variants so callers (the CLI in
/// particular) can map I/O failures and bad-input failures to different exit
/// statuses.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },

    /// Malformed structured input; `line` is 1-based within the document.
    #[error("{path}:{line}: {message}")]
    Syntax {
        path: String,
        line: u64,
        message: String,
    },

    /// Semantically invalid input or an operation called outside its contract.
    #[error("{context}: {message}")]
    Invalid { context: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn syntax(path: impl Into<String>, line: u64, message: impl Into<String>) -> Self {
        Error::Syntax {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn invalid(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            context: context.into(),
            message: message.into(),
        }
    }

    /// True for errors that stem from the filesystem rather than the input content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
