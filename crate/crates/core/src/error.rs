use thiserror::Error;

/// Errors produced by the accounting, calibration and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("curve has no bound at order {0}")]
    MissingOrder(f64),

    #[error("curves are defined on different order grids")]
    GridMismatch,

    #[error("invalid order grid: {0}")]
    InvalidGrid(String),

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("accounted epsilon is not monotone in {0}")]
    NonMonotone(String),

    #[error("calibration failed for grid entry {index}")]
    GridEntry {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
