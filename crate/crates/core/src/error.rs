use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("binomial coefficient C({n}, {m}) overflows 128-bit integers")]
    Overflow { n: u64, m: u64 },

    #[error("rank {rank} out of range for C({n}, {m}) = {count}")]
    RankOutOfRange {
        rank: u128,
        n: usize,
        m: usize,
        count: u128,
    },

    #[error("invalid tuple: {0}")]
    InvalidTuple(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("arity mismatch: kernel has arity {expected}, got {got} arguments")]
    ArityMismatch { expected: usize, got: usize },

    #[error("weighted kernel requires an index tuple")]
    MissingIndex,

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),

    #[error("expression error at position {pos}: {msg}")]
    Expression { pos: usize, msg: String },

    #[error("kernel is not symmetric; level projections require a symmetric kernel")]
    NotSymmetric,

    #[error("kernel is not certified degenerate ({0})")]
    NotDegenerate(String),

    #[error("non-finite value encountered while {0}")]
    NonFinite(String),

    #[error("{terms} enumerated terms exceed the cap of {cap}; use an incomplete design instead")]
    TooManyTerms { terms: u128, cap: u128 },

    #[error("index {index} out of range for sample size {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Whether this error stems from user input (configuration, parameters)
    /// rather than from I/O.
    pub fn is_usage(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
