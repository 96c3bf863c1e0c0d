use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("detection efficiency {0} outside [0, 1]")]
    EfficiencyOutOfRange(f64),

    #[error("invalid behavior: {0}")]
    InvalidBehavior(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("scenario too large: {vars} variables exceeds cap {cap}")]
    ScenarioTooLarge { vars: u128, cap: u128 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no violation found: {0}")]
    NoViolation(String),

    #[error("certificate failed verification: {0}")]
    Certificate(String),

    #[error("quadrature did not converge (achieved error estimate {0:e})")]
    Quadrature(f64),

    #[error("configuration error in {flag}: {message}")]
    Config { flag: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(flag: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            flag: flag.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
