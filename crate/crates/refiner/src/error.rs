use thiserror::Error;

#[derive(Debug, Error)]
pub enum RefinerError {
    #[error("bad input dimensions: {0}")]
    BadDimensions(String),

    #[error("loss mask selects no pixels")]
    EmptyMask,

    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("checkpoint config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("training set is empty")]
    EmptyDataset,

    #[error(transparent)]
    Flow(#[from] flowcore::FlowError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
