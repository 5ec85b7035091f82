use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {op} got {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("label error: {0}")]
    Label(String),

    #[error("split sizing error: {0}")]
    Split(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("cast error: {value} overflows {format}")]
    Cast { value: f64, format: &'static str },

    #[error("normalization error: spectrum {0} has no positive fragment intensity")]
    Normalization(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("numeric guard: {0}")]
    Numeric(String),

    #[error("training diverged at epoch {epoch}, step {step}: {detail}")]
    Divergence {
        epoch: usize,
        step: usize,
        detail: String,
    },

    #[error("search error: {0}")]
    Search(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("undefined metric: {0}")]
    Metric(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config digest mismatch: checkpoint {checkpoint}, config {config}")]
    DigestMismatch { checkpoint: String, config: String },

    #[error("{path}: {source}")]
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

    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }
}
