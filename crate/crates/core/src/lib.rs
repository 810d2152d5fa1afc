//! Consensus-based global optimization with a finite-difference extra gradient step.

pub mod benchmarks;
pub mod error;
pub mod harness;
pub mod neural;
pub mod objective;
pub mod swarm;
pub mod theory;

pub use error::{Error, Result};
