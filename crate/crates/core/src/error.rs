use thiserror::Error;

/// Errors raised by the numeric routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown family `{0}` (expected kulsif, lr, klest, boost, poly or ew)")]
    UnknownFamily(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid discrete pair: {0}")]
    InvalidPair(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("argument {value} outside the domain of {what}")]
    Domain { what: String, value: f64 },

    #[error("inversion of φ′ failed for target {target}: {reason}")]
    Inversion { target: f64, reason: String },

    #[error("linear system is singular: {0}")]
    Singular(String),

    #[error("loss is not strictly proper at η={eta}: weight ratios {pos} and {neg} disagree")]
    NotProper { eta: f64, pos: f64, neg: f64 },

    #[error("{count} of {total} score evaluations were clamped (limit {limit})")]
    ExcessiveClamping { count: usize, total: usize, limit: f64 },

    #[error("optimizer stopped without convergence: {0}")]
    Optimizer(String),

    #[error("cross-validation: {0}")]
    CrossValidation(String),

    #[error("parametric estimate leaves the positive cone at x={x}")]
    Barrier { x: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
