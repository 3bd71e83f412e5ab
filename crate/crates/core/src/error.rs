use thiserror::Error;

use crate::graph::VertexId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("walk length {requested} exceeds the enumeration cap {cap}")]
    EnumerationCap { requested: usize, cap: usize },

    #[error("enumeration would materialize more than {limit} walks")]
    TooManyWalks { limit: usize },

    #[error("walk is not a path in the {host} graph: {detail}")]
    InvalidWalk { host: &'static str, detail: String },

    #[error("rate at vertex {vertex} is {rate}; rates must be finite and non-negative")]
    InvalidRate { vertex: VertexId, rate: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time {t} is beyond the clock horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },

    #[error(
        "kernel contract violated at vertex {vertex}: total rate {total} exceeds bound {bound}"
    )]
    RateBound {
        vertex: VertexId,
        total: f64,
        bound: f64,
    },

    #[error("kernel contract violated at vertex {vertex}: {detail}")]
    KernelContract { vertex: VertexId, detail: String },

    #[error("state space has {states} states, above the oracle cap {cap}")]
    StateSpaceTooLarge { states: usize, cap: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
