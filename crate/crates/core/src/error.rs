use thiserror::Error;

/// Errors raised by profile construction, simulation and verification.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain too small: {0}")]
    DomainTooSmall(String),

    #[error("solver did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("shift {shift} leaves the trusted window |shift| <= {limit}")]
    OutOfWindow { shift: f64, limit: f64 },

    #[error("non-finite values in `{field}` at step {step}")]
    BlowUp { field: &'static str, step: usize },

    #[error("grid mismatch: expected {expected} points, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("config error at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("unknown claim `{0}`")]
    UnknownClaim(String),

    #[error("artifact hash mismatch: expected {expected}, found {found}")]
    HashMismatch { expected: String, found: String },

    #[error("path {path}: {source}")]
    Path {
        path: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics (blow-up, window exit, solver divergence).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::BlowUp { .. }
            | Error::OutOfWindow { .. }
            | Error::NoConvergence { .. }
            | Error::DomainTooSmall(_) => true,
            Error::Path { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub fn is_config(&self) -> bool {
        match self {
            Error::Config { .. }
            | Error::InvalidParameter { .. }
            | Error::UnknownClaim(_)
            | Error::HashMismatch { .. } => true,
            Error::Path { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
