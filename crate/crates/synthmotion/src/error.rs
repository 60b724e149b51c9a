use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("degenerate perturbation bounds: {0}")]
    BadBounds(String),

    #[error("transform is not invertible (det = {det})")]
    NonInvertible { det: f64 },

    #[error("slerp requires nonzero vectors")]
    ZeroNormVector,

    #[error("morph chain needs at least one step, got K = 0")]
    EmptyChain,

    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("dataset generation needs at least {min} source images, got {got}")]
    InsufficientSources { min: usize, got: usize },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error(transparent)]
    Flow(#[from] flowcore::FlowError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
