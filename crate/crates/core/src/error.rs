use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by instance generation, recovery and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("divergence at iteration {iteration}: non-finite {quantity}")]
    Divergence {
        iteration: usize,
        quantity: &'static str,
    },

    #[error("quadrature did not converge on [{lo}, {hi}]: error estimate {estimate:e} after {evaluations} evaluations")]
    Quadrature {
        lo: f64,
        hi: f64,
        estimate: f64,
        evaluations: usize,
    },

    #[error("invalid experiment config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
