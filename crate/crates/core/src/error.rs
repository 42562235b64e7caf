use thiserror::Error;

use crate::pgd::RunTrace;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// The objective blew up during projected gradient descent. The partial
    /// trace up to the offending iterate is kept for diagnostics and plots.
    #[error(
        "step size too large: objective {objective:e} at iteration {iteration} \
         (initial {initial:e})"
    )]
    Diverged {
        iteration: usize,
        objective: f64,
        initial: f64,
        trace: Box<RunTrace>,
    },

    #[error("malformed tensor file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
