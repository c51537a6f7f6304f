use thiserror::Error;

/// Errors raised by the solvers, builders and policies in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("round index {round} out of range for horizon {horizon}")]
    RoundOutOfRange { round: usize, horizon: usize },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("problem too large: {what} needs {size}, cap is {cap}")]
    TooLarge {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("Slater's condition fails for the {program} program (best slack {slack:.3e})")]
    SlaterViolated { program: &'static str, slack: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
