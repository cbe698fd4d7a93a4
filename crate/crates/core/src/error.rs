use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid fiber parameters: {0}")]
    InvalidFiber(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fiber guides no modes (V = {v})")]
    NoGuidedModes { v: f64 },
    #[error("requested {requested} modes but the fiber guides only {available}")]
    InsufficientModes { requested: usize, available: usize },
    #[error("grid too coarse to sample mode {mode}: discrete norm drifts by {drift:.3e}")]
    ResolutionTooCoarse { mode: String, drift: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid mode coefficients: {0}")]
    InvalidCoefficients(String),
    #[error("label has no usable weight entries")]
    DegenerateLabel,
    #[error("frame contains no signal")]
    EmptyFrame,
    #[error("correlation undefined for a constant image")]
    ConstantImage,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("max pooling needs even spatial dimensions, got {height}x{width}")]
    OddDimension { height: usize, width: usize },
    #[error("brute-force search supports at most 3 modes, got {0}")]
    TooManyModes(usize),
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
