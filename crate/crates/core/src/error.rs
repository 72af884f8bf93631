use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("empty set: {0}")]
    EmptySet(String),
    #[error("unbounded shape without bounding box: {0}")]
    Unbounded(String),
    #[error("nonconvex component where convex values are required: {0}")]
    Nonconvex(String),
    #[error("point lies in the set; no separation possible")]
    NoSeparation,
    #[error("pseudo-usc certificate failed at x_hat = {0:?}")]
    CertificateFailed(Vec<f64>),
    #[error("invalid bracket: {0}")]
    Bracket(String),
    #[error("ray never leaves the sublevel set within search range {0}")]
    UnboundedDirection(f64),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("expression error: {0}")]
    Expr(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
