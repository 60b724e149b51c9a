//! Evaluation metrics for registration pipelines: end-point error and
//! enhanced correlation for alignment, PSNR/SSIM for warped image quality,
//! and confusion-matrix change-detection scores, plus report emission.

mod cd;
mod error;
mod quality;
mod registration;
mod report;

pub use cd::{cd_scores, confusion, CdScores, ChangeMask, ConfusionMatrix};
pub use error::MetricsError;
pub use quality::{psnr, psnr_display, ssim, ssim_with, SsimParams};
pub use registration::{ecc, epe};
pub use report::{AggregateMetrics, EvalReport, PairMetrics, VariantAggregate};

pub type Result<T> = std::result::Result<T, MetricsError>;
