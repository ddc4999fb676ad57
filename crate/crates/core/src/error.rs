use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A state whose traceless part vanishes has no defined correlation.
    #[error("degenerate state: deviation norm {norm:e} below {threshold:e}")]
    DegenerateState { norm: f64, threshold: f64 },

    /// Two pulses (or a pulse and a block boundary) do not fit in the allotted time.
    #[error("pulse overlap at pulse {index}: available {available:e} s, required {required:e} s")]
    Overlap {
        index: usize,
        available: f64,
        required: f64,
    },

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid value at line {line}: {message}")]
    Semantic { line: usize, message: String },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("integrator tolerance breached: {0}")]
    Integrator(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
