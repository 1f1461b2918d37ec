//! Discrete-time replicator dynamics driven by similar-order preserving
//! fitness maps.

pub mod equilibrium;
pub mod error;
pub mod experiment;
pub mod fitness;
pub mod historic;
pub mod real;
pub mod replicator;
pub mod simplex;

pub use error::{Error, Result};
