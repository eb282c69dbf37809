use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Raster or field extents that do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// A parameter outside its legal range. `name` is the dotted path of the offending value.
    #[error("invalid parameter `{name}`: {reason}")]
    Param { name: String, reason: String },

    /// Input data that failed validation. `location` is `file:row` when known.
    #[error("{location}: {message}")]
    Data { location: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Param {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn data(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Data {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Prefixes the name of a parameter error with `path.`; other errors pass through.
    pub(crate) fn under(self, path: &str) -> Self {
        match self {
            Error::Param { name, reason } => Error::Param {
                name: format!("{path}.{name}"),
                reason,
            },
            other => other,
        }
    }

    /// True for failures caused by the environment rather than by the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
