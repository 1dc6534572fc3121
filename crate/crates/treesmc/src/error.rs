use thiserror::Error;

/// Crate-wide error type. Variants distinguish caller mistakes
/// (parameters, state) from data problems and numeric degeneracies so
/// the CLI can map them onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("empty block: an index set must contain at least one row")]
    EmptyBlock,

    #[error("degenerate particle population: all weights vanished")]
    DegenerateWeights,

    #[error("numerical underflow while normalizing proposal weights")]
    NumericalUnderflow,

    #[error("enumeration would exceed {limit} trees; instance too large")]
    InstanceTooLarge { limit: u64 },

    #[error("data error in {path}: {msg}")]
    Data { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_parameter(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn invalid_state(msg: impl Into<String>) -> Self {
        Error::InvalidState(msg.into())
    }

    pub fn data(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Data {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
