use thiserror::Error;

/// Errors raised by the simulator and the Fisher-information engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid spin dimension: {0}")]
    InvalidDimension(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    /// A numeric contract (hermiticity, unitarity, positivity) was broken.
    #[error("contract violation: {what} (residual {residual:.3e})")]
    Contract { what: String, residual: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("wrong basis: expected {expected}, found {found}")]
    WrongBasis {
        expected: &'static str,
        found: &'static str,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("family is not differentiable at theta = {theta}: {reason}")]
    NonDifferentiable { theta: f64, reason: String },
}

impl Error {
    pub(crate) fn params(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }

    /// True for violations of numeric contracts (as opposed to bad input).
    pub fn is_contract_violation(&self) -> bool {
        matches!(self, Error::Contract { .. } | Error::InvalidState(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
