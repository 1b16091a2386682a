use thiserror::Error;

pub type Result<T, E = PalsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PalsError {
    /// A tunable is out of range or inconsistent with another one.
    #[error("configuration error: {0}")]
    Config(String),
    /// The caller violated an operation's precondition.
    #[error("usage error: {0}")]
    Usage(String),
    /// Input data is well-formed but semantically invalid.
    #[error("data error: {0}")]
    Data(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("oracle error: {0}")]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PalsError {
    /// True for errors a user fixes by changing flags or config files.
    pub fn is_usage(&self) -> bool {
        matches!(self, PalsError::Config(_) | PalsError::Usage(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("oracle declined to label instance {0}")]
    Declined(u64),
    #[error("oracle timed out on instance {0}")]
    Timeout(u64),
    #[error("oracle has no label for instance {0}")]
    Unknown(u64),
    #[error("oracle unavailable: {0}")]
    Unavailable(String),
}

pub(crate) fn config_err(msg: impl Into<String>) -> PalsError {
    PalsError::Config(msg.into())
}

pub(crate) fn usage_err(msg: impl Into<String>) -> PalsError {
    PalsError::Usage(msg.into())
}

pub(crate) fn data_err(msg: impl Into<String>) -> PalsError {
    PalsError::Data(msg.into())
}
