//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors emitted across the crate. Variants are grouped by the failure
/// class they represent so callers (notably the CLI) can map them to exit
/// codes: configuration/usage, data/format, or numeric failures.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes incompatible for an operation; both shapes are named.
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// A tensor or argument had an invalid dimension for the operation.
    #[error("invalid dimension in {op}: {detail}")]
    InvalidDimension { op: &'static str, detail: String },

    /// Mixed 32/64-bit operands where a single precision is required.
    #[error("mixed precision operands in {0}")]
    MixedPrecision(&'static str),

    /// An index was outside the valid range.
    #[error("index out of range in {op}: {index} not in 0..{bound}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        bound: usize,
    },

    /// A non-finite value appeared where the contract requires finite data.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Training produced NaN gradients or parameters.
    #[error("training divergence: {0}")]
    TrainingDivergence(String),

    /// An operation contract was violated (e.g. empty mask set).
    #[error("contract violation in {op}: {detail}")]
    Contract { op: &'static str, detail: String },

    /// A task/regime combination the model does not support.
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    /// Malformed or unparseable input data.
    #[error("data error: {0}")]
    Data(String),

    /// Checkpoint or manifest format violation.
    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn contract(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Contract {
            op,
            detail: detail.into(),
        }
    }

    pub fn data(detail: impl Into<String>) -> Self {
        Error::Data(detail.into())
    }

    pub fn format(detail: impl Into<String>) -> Self {
        Error::Format(detail.into())
    }
}
