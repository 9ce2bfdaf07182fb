//! Cooperative localization of mobile nodes from peer-to-peer ranges that may
//! be line-of-sight or not.
//!
//! Each mobile node runs a particle filter over its own position while
//! tracking, per neighbor, a two-state belief over the hidden LOS indicator.
//! The [`runtime`] module wires nodes together over a broadcast bus and the
//! [`baselines`] module holds the reference estimators used for comparison.

pub mod baselines;
pub mod error;
pub mod filter;
pub mod experiment;
pub mod math;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod runtime;
pub mod scenario;
pub mod types;

pub use error::{Error, Result};
pub use model::{LosIndicator, LosTransition, MixtureParams};
pub use types::{NodeId, NodeKind, PairKey, Position};

// Compile and run the guide's code blocks as doc-tests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/range-model.md")]
    mod range_model {}
    #[doc = include_str!("../../../book/src/los-chain.md")]
    mod los_chain {}
    #[doc = include_str!("../../../book/src/particle-filter.md")]
    mod particle_filter {}
    #[doc = include_str!("../../../book/src/runtime.md")]
    mod runtime {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
