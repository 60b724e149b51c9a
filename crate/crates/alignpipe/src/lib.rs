//! Pipeline orchestration: configuration, dataset ingestion, run manifests
//! with resumable stages, and the perturb / chain / compose / train /
//! refine / eval / report commands gluing the toolkit together.

pub mod config;
pub mod error;
pub mod manifest;
pub mod stages;

pub use config::{FlowSource, MaskPolicy, PipelineConfig};
pub use error::PipelineError;
pub use manifest::RunManifest;

pub type Result<T> = std::result::Result<T, PipelineError>;
