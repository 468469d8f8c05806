use thiserror::Error;

/// Failure modes shared by every solver layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("{what} did not converge in {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("arc left the validity box at t = {time}")]
    BoundaryExit { time: f64 },
    #[error("shooting failed after {iterations} iterations (endpoint miss {residual:.3e})")]
    Shooting { iterations: usize, residual: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("inconsistent result: {0}")]
    Inconsistency(String),
    #[error("theorem violation: {0}")]
    TheoremViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
