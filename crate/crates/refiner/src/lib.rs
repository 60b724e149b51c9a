//! Residual flow refinement: a U-Net-style network that predicts a
//! correction `dF` for a coarse flow given both images, fusing the flow at
//! the bottleneck through a learned projection and channel gating. The
//! refined flow is `F + dF`. Training minimizes Smooth-L1 against exact
//! synthetic ground truth with adaptive-moment updates; the residual head
//! is zero-initialized so an untrained model is the identity refiner.
//!
//! All numerics are hand-rolled and generic over `f32`/`f64`; the `f64`
//! instantiation exists for finite-difference gradient verification.

mod checkpoint;
mod error;
mod layers;
mod loss;
mod model;
mod real;
mod tensor;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use error::RefinerError;
pub use loss::{smooth_l1, smooth_l1_tensor};
pub use model::{ForwardCache, Gradients, RefinerConfig, RefinerModel};
pub use real::Real;
pub use tensor::Tensor;
pub use train::{train, EpochStats, TrainOutcome, TrainSample, Trainer};

pub type Result<T> = std::result::Result<T, RefinerError>;
