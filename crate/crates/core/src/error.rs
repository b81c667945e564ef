use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {left} nodes vs {right} nodes")]
    GridMismatch { left: usize, right: usize },

    #[error("non-finite value at node {index}")]
    NonFinite { index: usize },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("inviscid ODE radicand {value:.3e} at x = {x:.6} is negative; lambda too large for the branch formula")]
    NegativeRadicand { x: f64, value: f64 },

    #[error("Lax-Friedrichs iteration diverged; increase sigma (currently {sigma})")]
    Diverged { sigma: f64 },

    #[error("negative density {value:.3e} at node {index}; refine the grid")]
    NegativeDensity { index: usize, value: f64 },

    #[error("density mass {mass} deviates from 1")]
    Mass { mass: f64 },

    #[error("horizon too short: exp(-lambda T) = {tail:.3e} exceeds 1e-6")]
    HorizonTooShort { tail: f64 },

    #[error("critical value c(H) unknown for model `{0}`")]
    UnknownCriticalValue(String),

    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NotConverged { residual: f64, iterations: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
