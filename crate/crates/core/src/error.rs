use std::path::PathBuf;

use thiserror::Error;

use crate::polyapprox::ChebApprox;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("function returned NaN at x = {x}")]
    NanInput { x: f64 },

    #[error(
        "remez did not converge after {iterations} iterations (certified bounds [{lower:e}, {upper:e}])"
    )]
    NotConverged {
        iterations: usize,
        lower: f64,
        upper: f64,
        last: Box<ChebApprox>,
    },

    #[error("degenerate alternation set: {0}")]
    Degenerate(String),

    #[error("integer overflow computing {0}")]
    Overflow(String),

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
