use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("point cloud needs at least {required} points, got {got}")]
    TooFewPoints { required: usize, got: usize },
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("query point lies on the mesh surface")]
    OnSurface,
    #[error("empty point set")]
    Empty,
    #[error("optimization produced a non-finite value at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
