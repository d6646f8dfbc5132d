//! Shared error type for the toolkit.

/// Errors surfaced by solvers, diagnostics, and data ingestion.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A scalar or structural argument is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two vectors that must share a dimension do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Aligned series (per-window or per-iteration inputs) have inconsistent lengths.
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    /// An iterate or gradient became NaN/infinite; the run is aborted rather
    /// than letting the poison propagate through later diagnostics.
    #[error("non-finite value encountered at iteration {k}")]
    NonFinite { k: usize },

    /// A stochastic gradient was requested over an empty index set.
    #[error("empty minibatch")]
    EmptyBatch,

    /// An operation that needs at least one coordinate received none.
    #[error("empty vector")]
    EmptyVector,

    /// Text-format ingestion failed; `line` is 1-based and counts physical lines.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A per-iteration diagnostic was requested on a problem too large for it.
    #[error("diagnostic size guard exceeded: {0}")]
    SizeGuard(String),

    /// A documented precondition of the operation does not hold at runtime.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
