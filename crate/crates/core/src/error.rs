use thiserror::Error;

/// Errors raised by the solver, its tables and the file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("grid dimension {axis} has odd size {size}; the tetrahedral scheme needs even dimensions")]
    OddDimension { axis: usize, size: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid material: {0}")]
    Material(String),

    #[error("singular Green matrix at frequency index {index} (q = {q:?})")]
    SingularGreen { index: usize, q: [f64; 3] },

    #[error("Green matrix at frequency index {index} is not real (imaginary part {imag:e})")]
    ComplexGreen { index: usize, imag: f64 },

    #[error("iteration {iteration} produced a non-finite value")]
    Divergence { iteration: usize },

    #[error("oracle grid too large: {voxels} voxels (limit {limit})")]
    OracleTooLarge { voxels: usize, limit: usize },

    #[error("oracle stiffness matrix is singular beyond the translation modes")]
    OracleSingular,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
