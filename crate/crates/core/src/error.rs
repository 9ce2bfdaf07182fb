use thiserror::Error;

use crate::types::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain where the model is defined.
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("stationary distribution undefined: chain with p01 = 0 and p11 = 1 has two absorbing states")]
    UndefinedStationary,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("node {0} is an anchor; anchors have no inertial readings or filters")]
    AnchorNode(NodeId),

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("no belief is held for neighbor {0}")]
    UnknownNeighbor(NodeId),

    /// Every particle ended up with zero likelihood.
    #[error("all particle weights collapsed to zero")]
    TotalDegeneracy,

    #[error("estimator needs at least {needed} neighbors, got {got}")]
    TooFewNeighbors { needed: usize, got: usize },

    /// No minimal subset of readings agreed with itself.
    #[error("no consistent subset of readings")]
    NoConsensus,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::ParameterDomain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
