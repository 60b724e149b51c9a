//! Built-in short-range dense flow estimator (pyramidal local least squares
//! under brightness constancy) and a `.flo` directory contract for dropping
//! in flows computed by external matchers instead.

mod error;
mod external;
mod lk;
mod pyramid;

pub use error::StepFlowError;
pub use external::load_external_flows;
pub use lk::{estimate_chain, estimate_flow, EstimatorConfig};

pub type Result<T> = std::result::Result<T, StepFlowError>;
