use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("impulse offset alpha must lie in (0, 1], got {0}")]
    InvalidOffset(f64),

    #[error("impulse index k must be at least 1 (t_0 = 0 is the initial time, not an impulse)")]
    ZeroImpulseIndex,

    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error("horizon T must be positive, got {0}")]
    NonPositiveHorizon(f64),

    #[error("horizon T = {horizon} is not a multiple of dt = 2^-{exponent}")]
    HorizonNotOnGrid { horizon: f64, exponent: u32 },

    #[error("impulse offset alpha = {alpha} is not a multiple of dt = 2^-{exponent}; impulse times would fall between grid nodes")]
    MisalignedImpulses { alpha: f64, exponent: u32 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("path {path} diverged at eps = {eps}: {source}")]
    PathFailed {
        eps: f64,
        path: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
