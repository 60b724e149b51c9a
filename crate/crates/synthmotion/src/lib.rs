//! Synthetic misalignment generator: rotation/scale/translation perturbations
//! with exact analytic ground-truth flows, fractional-affine morph chains,
//! appearance ramps, structured flow corruption, and deterministic dataset
//! generation with train/val/test splits.

mod affine;
mod chain;
mod corrupt;
mod dataset;
mod error;
mod slerp;
mod texture;

pub use affine::{
    affine_flow, apply_affine, max_displacement, sample_affine, step_transform, Affine2,
    AffineTransform, PerturbBounds,
};
pub use chain::{make_morph_chain, AppearanceRamp, MorphChain};
pub use corrupt::{corrupt_flow, CorruptParams};
pub use dataset::{
    generate_dataset, read_manifest, write_manifest, DatasetParams, PairRecord, SourceEntry, Split,
};
pub use error::SynthError;
pub use slerp::slerp;
pub use texture::{synth_texture, TextureParams};

pub type Result<T> = std::result::Result<T, SynthError>;
