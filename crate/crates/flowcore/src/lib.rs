//! Core raster and flow-field toolkit: images as `[0,1]` intensity grids,
//! dense displacement fields with validity masks, bilinear sampling,
//! backward warping, flow composition, flow resampling, and bit-exact
//! Middlebury `.flo` file I/O.
//!
//! All flows follow a single convention: a field lives on the reference
//! grid and stores backward-lookup displacements into the target image,
//! so `warp_image(target, flow)` aligns the target onto the reference.

mod compose;
mod error;
mod flo;
mod flow;
mod image;
mod sample;
mod warp;

pub use compose::{compose_chain, compose_flows};
pub use error::FlowError;
pub use flo::{read_flo, write_flo};
pub use flow::{resample_flow, FlowField};
pub use image::Image;
pub use sample::{bilinear_sample, bilinear_sample_scalar, ValidMaskPolicy};
pub use warp::warp_image;

pub type Result<T> = std::result::Result<T, FlowError>;
