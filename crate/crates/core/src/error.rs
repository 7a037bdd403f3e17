use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {dim} exceeds the configured cap {cap}")]
    TooLarge { dim: usize, cap: usize },

    #[error(
        "Chebyshev expansion needs order {required} but the maximum is {max}; \
         raise the maximum order or reduce the propagation length"
    )]
    ChebyshevOrder { required: usize, max: usize },

    #[error("inverse temperature must be finite and non-negative, got {0}")]
    InvalidBeta(f64),

    #[error("b fit undefined: all system energies are equal")]
    UndefinedFit,

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("table parse error at line {line}: {message}")]
    Table { line: usize, message: String },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: message.into(),
        }
    }
}
