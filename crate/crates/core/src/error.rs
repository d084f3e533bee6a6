use alloc::string::String;

/// Errors produced by the fusion core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },
    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("non-contiguous labels: {0}")]
    NonContiguousLabels(String),
    #[error("cannot stratify: class {class} has {count} members, need at least {needed}")]
    Stratification {
        class: usize,
        count: usize,
        needed: usize,
    },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive semi-definite (eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("matrix does not have full column rank (smallest singular value {0:e})")]
    RankDeficient(f64),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("kernel cap exceeded: {n} rows > cap {cap}")]
    KernelCap { n: usize, cap: usize },
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Wraps the error with a human-readable location, e.g. a grid point.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: alloc::boxed::Box::new(self),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
