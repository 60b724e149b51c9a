use std::path::PathBuf;
use thiserror::Error;

/// Errors produced by image and flow-field operations.
#[derive(Debug, Error)]
pub enum FlowError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid image data: {0}")]
    InvalidImage(String),

    #[error("bad magic in {path}: flow files must start with \"PIEH\"")]
    BadMagic { path: PathBuf },

    #[error("truncated flow file {path}: expected {expected} payload bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("non-finite flow component at pixel index {index}{}", path.as_ref().map(|p| format!(" in {}", p.display())).unwrap_or_default())]
    NonFinite { path: Option<PathBuf>, index: usize },

    #[error("implausible flow dimensions {width}x{height} in {path}")]
    BadDimensions {
        path: PathBuf,
        width: i32,
        height: i32,
    },

    #[error("trailing bytes after flow payload in {path}")]
    TrailingData { path: PathBuf },

    #[error("unsupported image format: {0}")]
    UnsupportedImage(String),

    #[error("png decode error: {0}")]
    PngDecode(#[from] png::DecodingError),

    #[error("png encode error: {0}")]
    PngEncode(#[from] png::EncodingError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
