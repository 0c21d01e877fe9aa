use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A collection has the wrong number of elements.
    #[error("size error: {0}")]
    Size(String),

    /// Input exceeds what an exact solver accepts.
    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    /// Matrix or parameter vector dimensions do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// NaN or infinity encountered where finite values are required.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("state error: {0}")]
    State(String),
}
