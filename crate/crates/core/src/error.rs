use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate weights: total weight is {0}")]
    DegenerateWeights(f64),

    #[error("empty ledger: no slots recorded")]
    EmptyLedger,

    #[error("invalid horizon: T = {horizon} is too small for N = {workers}; need T >= {min_horizon}")]
    InvalidHorizon { workers: usize, horizon: usize, min_horizon: usize },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("config invalid: {0}")]
    ConfigInvalid(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
