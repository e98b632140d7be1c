use thiserror::Error;

/// Errors raised by the case-mix toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("model cannot be fit: {0}")]
    Unfittable(String),

    #[error("quasi-separation detected after {iterations} iterations (|coefficient| = {magnitude:.3})")]
    Separation { iterations: usize, magnitude: f64 },

    #[error("transport violation: {0}")]
    TransportViolation(String),

    #[error("precondition not met: {0}")]
    Precondition(String),

    #[error("baseline AUC {0} is not above 0.5")]
    NonInformativeBaseline(f64),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("format error at line {line}: {message}")]
    Format { line: u64, message: String },

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
