use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("{what}: argument {value} outside domain")]
    Domain { what: &'static str, value: f64 },

    /// A model or law parameter is not admissible.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two laws were expected to share a support and do not.
    #[error("support mismatch: {0}")]
    SupportMismatch(String),

    /// The chain has no invariant law at this parameter.
    #[error("parameter {theta} is not ergodic for {model}")]
    NonErgodic { model: &'static str, theta: f64 },

    /// State-space truncation could not reach the requested tail weight.
    #[error("truncation at ceiling {ceiling} leaves tail weight {tail:e}")]
    Truncation { ceiling: usize, tail: f64 },

    /// Quadrature did not converge.
    #[error("quadrature failed: {0}")]
    Quadrature(String),

    /// Some other numerical failure (underflow, indefinite matrix, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An experiment or CLI configuration is inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// True for errors caused by bad input rather than numerical trouble.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Domain { .. } | Error::InvalidParameter(_) | Error::SupportMismatch(_) | Error::Config(_))
    }
}
