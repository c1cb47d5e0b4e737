use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("elements belong to different fields")]
    FieldMismatch,
    #[error("division by an element that is zero to precision")]
    DivisionByZero,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("group is not in good position: {0}")]
    NotGoodPosition(String),
    #[error("invalid divisor: {0}")]
    InvalidDivisor(String),
    #[error("point is outside the required region: {0}")]
    OutOfDomain(String),
    #[error("precision exhausted: {0}")]
    Precision(String),
    #[error("computation refused: {0}")]
    Budget(String),
    #[error("internal check failed: {0}")]
    Verification(String),
}

pub type Result<T> = std::result::Result<T, Error>;
