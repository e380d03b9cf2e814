use thiserror::Error;

use crate::solver::Assignment;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("size guard: {0}")]
    SizeGuard(String),

    /// The dual iteration hit its iteration cap with repair disabled.
    /// Carries the best feasible iterate seen, if any, with its sum rate.
    #[error("solver did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize, best: Option<(Assignment, f64)> },

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("decoding error: {0}")]
    Decoding(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Training loss became non-finite. `history` holds the per-epoch
    /// losses completed before the failure.
    #[error("training diverged in epoch {epoch}")]
    Divergence { epoch: usize, history: Vec<f64> },

    #[error("split error: {0}")]
    Split(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
