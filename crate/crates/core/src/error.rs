use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter set violates one of the model assumptions.
    #[error("{assumption}: {message}")]
    Assumption {
        assumption: &'static str,
        message: String,
    },

    /// Request exceeds what a built object or an oracle can serve.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// The Legendre objective kept increasing past the bracket cap.
    #[error("conjugate diverges at x = {x}: objective still increasing at t = {t}")]
    Divergent { x: f64, t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn assumption(assumption: &'static str, message: impl Into<String>) -> Error {
    Error::Assumption {
        assumption,
        message: message.into(),
    }
}
