use thiserror::Error;

/// Errors raised by the design, solver and simulation routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("no stabilizing Riccati solution: {0}")]
    NoStabilizingSolution(String),

    #[error("matrix is not Hurwitz (max real eigenvalue {max_real:.3e})")]
    NotHurwitz { max_real: f64 },

    #[error("{which} is not positive definite")]
    NotPositiveDefinite { which: &'static str },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("pseudo-time iteration not stationary after {steps} steps (last rate {rate:.3e})")]
    NotStationary { steps: usize, rate: f64 },

    #[error("continuation region reaches the grid edge; enlarge the domain")]
    OmegaTouchesBoundary,

    #[error("non-finite value encountered in the value function")]
    NonFiniteValue,

    #[error("continuation region is empty")]
    EmptyOmega,

    #[error("simulated state became non-finite at t = {t:.6}")]
    NonFiniteState { t: f64 },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("invalid plant: {}", .0.join("; "))]
    InvalidPlant(Vec<String>),

    #[error("read/write failed: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
