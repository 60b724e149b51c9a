use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),

    #[error("no dataset manifest at {0}; run `perturb` first")]
    MissingManifest(PathBuf),

    #[error("pair {0} not found in the dataset manifest")]
    UnknownPair(String),

    #[error("pair {id}: missing {what} at {path}")]
    MissingArtifact {
        id: String,
        what: &'static str,
        path: PathBuf,
    },

    #[error("no checkpoint at {0}; run `train` first")]
    MissingCheckpoint(PathBuf),

    #[error("stage produced no usable outputs: {0}")]
    EmptyStage(String),

    #[error(transparent)]
    Flow(#[from] flowcore::FlowError),

    #[error(transparent)]
    Synth(#[from] synthmotion::SynthError),

    #[error(transparent)]
    Step(#[from] stepflow::StepFlowError),

    #[error(transparent)]
    Refiner(#[from] refiner::RefinerError),

    #[error(transparent)]
    Metrics(#[from] evalmetrics::MetricsError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(String),
}
