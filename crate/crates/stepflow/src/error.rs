use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StepFlowError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid estimator config: {0}")]
    InvalidConfig(String),

    #[error("chain needs at least 2 frames, got {0}")]
    TooFewFrames(usize),

    #[error("estimating flow for chain step {index}: {source}")]
    AtStep {
        index: usize,
        #[source]
        source: Box<StepFlowError>,
    },

    #[error("missing external flow file {0}")]
    MissingStep(PathBuf),

    #[error("external flow {path}: {source}")]
    FlowFile {
        path: PathBuf,
        #[source]
        source: flowcore::FlowError,
    },

    #[error("external flow {path} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    WrongDimensions {
        path: PathBuf,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
}
