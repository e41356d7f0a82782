use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("size bound exceeded: {0}")]
    Overflow(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("matrix is singular to working precision (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("gate `{gate}` is not supported by {context}")]
    UnsupportedGate { gate: String, context: &'static str },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("executor failed on setting `{setting}`: {message}")]
    Executor { setting: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable category, used for CLI error reports and FFI codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::Dimension(_) => "dimension",
            Error::Overflow(_) => "overflow",
            Error::Contract(_) => "contract",
            Error::Singular { .. } => "singular",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::UnsupportedGate { .. } => "unsupported_gate",
            Error::Parse { .. } => "parse",
            Error::Executor { .. } => "executor",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
