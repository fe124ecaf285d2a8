use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PinError {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("not a renewal mass function: K({n}) = {value:e}")]
    InconsistentMass { n: usize, value: f64 },

    #[error("empty configuration set: u({span}) = 0")]
    EmptyConfiguration { span: usize },

    #[error("horizon exceeded: need {needed}, have {available}")]
    Horizon { needed: usize, available: usize },

    #[error("refusing exhaustive evaluation: {0}")]
    TooLarge(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, PinError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(PinError::Domain(msg.into()))
}
