//! Reference estimators the particle filter is compared against.

mod ml;
mod ransac;

pub use ml::{genie_ml_estimate, ml_objective, AnchoredRange, MlConfig, MlEstimate};
pub use ransac::{ransac_estimate, RansacConfig};
