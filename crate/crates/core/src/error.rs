use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },

    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },

    #[error("evaluation singularity: {what} at {point:?}")]
    Singular { what: &'static str, point: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("nodes {first} and {second} share coordinate {value} on axis {axis}")]
    SharedCoordinate {
        first: usize,
        second: usize,
        axis: usize,
        value: f64,
    },

    #[error("zero pivot: {0}")]
    ZeroPivot(String),

    #[error("singular block at node {node} (condition estimate {condition:e})")]
    SingularBlock { node: usize, condition: f64 },

    #[error("insufficient degree: {0}")]
    InsufficientDegree(String),

    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),
}

impl Error {
    /// Input-validation failures, as opposed to numerical breakdowns.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. }
                | Error::UnknownIdentifier { .. }
                | Error::DimensionMismatch { .. }
                | Error::IndexOutOfRange { .. }
                | Error::InvalidInput(_)
                | Error::SharedCoordinate { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
