use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlmbError {
    #[error("empty GLMB")]
    EmptyDensity,
    #[error("measurement index {index} outside 0..={max}")]
    IndexOutOfRange { index: i64, max: usize },
    #[error("assignment vector {0:?} is not positive 1-1")]
    NotPositiveOneToOne(Vec<i32>),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("model contract violated: {0}")]
    ModelContract(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("degenerate likelihood: all particle weights vanished")]
    DegenerateLikelihood,
    #[error("instance too large for exhaustive enumeration ({0} terms)")]
    TooLarge(usize),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, GlmbError>;
