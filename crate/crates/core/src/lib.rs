pub mod commands;
pub mod config;
pub mod error;
pub mod graph;
pub mod graphical;
pub mod ips;
pub mod random_graphs;
pub mod rng;
pub mod saw;
pub mod verify;

pub use error::{Error, Result};
pub use graph::{Graph, VertexId, Window};
