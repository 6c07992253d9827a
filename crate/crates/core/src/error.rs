use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A CMDP or feature document failed validation. `path` is a JSON-style
    /// index path such as `transition[1][0]`.
    #[error("validation failed at {path}: {message}")]
    Validation { path: String, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A quantity such as `-log pi(a|s)` is undefined for the given input.
    #[error("domain error: {0}")]
    Domain(String),

    /// The constraint `J_c >= 0` admits no strictly feasible policy.
    #[error("constraint infeasible: max attainable J_c is {max_jc:.6e}")]
    Infeasible { max_jc: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e}): {context}")]
    NonConvergence {
        context: String,
        iterations: usize,
        residual: f64,
    },

    #[error("schedule infeasible: {0}")]
    ScheduleInfeasible(String),

    #[error("iterate diverged: {0}")]
    Diverged(String),

    #[error("linear program failed: {0}")]
    LinearProgram(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}
