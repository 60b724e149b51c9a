use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("metric mask selects no pixels")]
    EmptyMask,

    #[error("zero-variance input: cosine similarity undefined")]
    ZeroVariance,

    #[error("image {got_w}x{got_h} smaller than the {window}x{window} window")]
    WindowTooLarge {
        got_w: usize,
        got_h: usize,
        window: usize,
    },

    #[error("invalid mask labels: value {0} not in {{0,1}}")]
    BadLabel(u8),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
