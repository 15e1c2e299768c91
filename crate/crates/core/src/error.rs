use thiserror::Error;

/// Errors produced by the estimators and their inputs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("orbit left the domain at step {step}")]
    OutOfDomain { step: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("no usable samples: {0}")]
    NoSamples(String),

    #[error("budget exhausted: {0}")]
    BudgetExhausted(String),

    #[error("derivative bound of order {order} unavailable for this curve")]
    DerivativeBoundUnavailable { order: usize },

    #[error("curve is not admissible: {0}")]
    InadmissibleCurve(String),

    #[error("cover impossible within the cloud: {uncovered} points cannot be covered")]
    CoverImpossible { uncovered: usize },

    #[error("invariant violated: {0}")]
    InvariantViolated(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for failures of the numerics themselves (budget, escape,
    /// invariant) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::OutOfDomain { .. }
                | Error::NoSamples(_)
                | Error::BudgetExhausted(_)
                | Error::CoverImpossible { .. }
                | Error::InvariantViolated(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
