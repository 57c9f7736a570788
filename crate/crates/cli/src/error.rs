use evsample::error::Error;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("invalid input:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("{0}")]
    Core(#[from] Error),

    #[error("every trade-off point failed")]
    NoPoints,
}

impl CliError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Validation(_) => 2,
            Self::NoPoints => 5,
            Self::Core(e) => match e {
                Error::Io(_) => 1,
                Error::NoStabilizingSolution(_) | Error::NotHurwitz { .. } => 3,
                Error::NotStationary { .. }
                | Error::OmegaTouchesBoundary
                | Error::NonFiniteValue
                | Error::EmptyOmega
                | Error::Factorization(_) => 4,
                Error::Dimension(_)
                | Error::NotPositiveDefinite { .. }
                | Error::Domain(_)
                | Error::InvalidGrid(_)
                | Error::NonFiniteState { .. }
                | Error::InvalidPlant(_) => 2,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Usage(e.to_string())
    }
}
