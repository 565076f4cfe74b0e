use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("split error: {0}")]
    Split(String),

    #[error("standardization error: {0}")]
    Standardize(String),

    #[error("windowing error: {0}")]
    Window(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error in `{op}`: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("numeric error in `{op}`: {detail}")]
    Numeric { op: &'static str, detail: String },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("capability error: {0}")]
    Capability(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}
