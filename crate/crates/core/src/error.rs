use thiserror::Error;

/// Errors surfaced by model construction, discretization and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameter: {0}")]
    Model(String),
    #[error("discretization rejected: {0}")]
    Discretization(String),
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("measure error: {0}")]
    Measure(String),
    #[error("linear program did not converge: {0}")]
    Simplex(String),
    #[error("audit precondition violated: {0}")]
    Audit(String),
    #[error("rate fit rejected: {0}")]
    Fit(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
