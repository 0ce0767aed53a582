use thiserror::Error;

/// Errors raised by the sampling laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    #[error("grid truncation: {0}")]
    Truncation(String),

    #[error("stepsize too large: {0}")]
    StepsizeTooLarge(String),

    #[error("mass not conserved by proximal step: mass {mass} outside 1 ± {tolerance}")]
    MassLoss { mass: f64, tolerance: f64 },

    #[error("particle {index} is isolated from the ensemble (log density {log_density})")]
    IsolatedParticle { index: usize, log_density: f64 },

    #[error("{clamped} of {total} particles fell outside the score grid")]
    OffGrid { clamped: usize, total: usize },

    #[error("aborted at iteration {iter}: {source}")]
    Aborted { iter: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// True for errors caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Parameter(_) => false,
            Error::Aborted { source, .. } => source.is_numerical(),
            _ => true,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
