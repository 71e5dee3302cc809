use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{0} is not a proper rotation matrix")]
    NotARotation(&'static str),

    #[error("failed to parse {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("solver diverged at outer iteration {outer}: non-finite merit at iterate {iterate:?}")]
    SolverDiverged { outer: usize, iterate: Vec<f64> },

    #[error("simulation diverged at t = {time:.6} s")]
    Diverged { time: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::Dimension {
                what,
                expected,
                got,
            })
        }
    }
}
