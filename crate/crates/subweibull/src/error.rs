use thiserror::Error;

/// Failures raised by the library. Infinite divergences are values, not errors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Domain { field: &'static str, reason: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("unattainable: {reason} (best achievable {best})")]
    Unattainable { reason: String, best: f64 },
}

impl Error {
    pub fn domain(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain { field, reason: reason.into() }
    }

    pub fn numerical(reason: impl Into<String>) -> Self {
        Error::Numerical(reason.into())
    }

    pub fn unattainable(reason: impl Into<String>, best: f64) -> Self {
        Error::Unattainable { reason: reason.into(), best }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
