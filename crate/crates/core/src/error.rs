use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent architecture, out-of-range layer counts, bad shapes.
    #[error("configuration error: {0}")]
    Config(String),

    /// A deletion-test specification that cannot be satisfied by the dataset.
    #[error("test spec error: {0}")]
    Spec(String),

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("numeric stability error: {0}")]
    Numeric(String),

    #[error("aggregation error: {0}")]
    Aggregation(String),

    /// A read of a deletion-set sample through an audited view.
    #[error("access violation: deletion-set sample {index} was read")]
    AccessViolation { index: usize },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn spec(msg: impl Into<String>) -> Self {
        Error::Spec(msg.into())
    }

    pub(crate) fn eval(msg: impl Into<String>) -> Self {
        Error::Evaluation(msg.into())
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
