use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected} samples, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("quadrature did not converge: {0}")]
    Convergence(String),

    #[error("ODE solver stalled at t = {t} (step {step:e})")]
    SolverStall { t: f64, step: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("path with seed {seed} failed: {message}")]
    PathFailure { seed: u64, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

/// Coarse error classes used to map failures onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Hypothesis,
    Config,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Hypothesis(_) => ErrorClass::Hypothesis,
            Error::Domain(_)
            | Error::Shape { .. }
            | Error::Precondition(_)
            | Error::Parameter(_)
            | Error::Config(_)
            | Error::InsufficientData(_)
            | Error::Io(_) => ErrorClass::Config,
            Error::Convergence(_) | Error::SolverStall { .. } | Error::PathFailure { .. } => {
                ErrorClass::Numerical
            }
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
