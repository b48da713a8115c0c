use thiserror::Error;

/// Errors produced by the sharing, decoding and analysis layers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("division by zero in field")]
    DivisionByZero,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("singular system")]
    SingularSystem,

    #[error("inconsistent system")]
    InconsistentSystem,

    #[error("no secret capacity: {0}")]
    NoSecretCapacity(String),

    #[error("decoding failure: {0}")]
    DecodingFailure(String),

    #[error("hash recovery failure: {0}")]
    HashRecoveryFailure(String),

    #[error("detection abort: {0}")]
    DetectionAbort(String),

    #[error("contract violation: adversary requested state of party {0} outside its read set")]
    ContractViolation(usize),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
