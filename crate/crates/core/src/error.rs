use thiserror::Error;

/// Errors produced by the model, pricers and analytics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A model or contract parameter violates its admissible range.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    /// An adaptive quadrature did not reach the requested tolerance.
    #[error("quadrature did not converge: achieved error {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    /// The Riccati integration could not proceed, typically because the
    /// characteristic function argument lies outside its domain of analyticity.
    #[error("riccati integration failed at t = {t:.6}: {reason}")]
    OdeFailure { t: f64, reason: String },

    /// A root search has no solution inside the admissible bracket.
    #[error("no solution: target {target:.10} outside attainable range [{lower:.10}, {upper:.10}]")]
    NoSolution { target: f64, lower: f64, upper: f64 },

    /// The run configuration could not be read or parsed.
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of a numerical method, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. } | Error::OdeFailure { .. } | Error::NoSolution { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
