//! Semidiscrete optimal transport toolkit: dual solvers, limit-law and
//! bootstrap inference for transport costs and potentials, exact small-case
//! oracles, and the batch experiments exposed by the `sdot` binary.

pub mod clt;
pub mod cost;
pub mod error;
pub mod inference;
pub mod measures;
pub mod oracle;
pub mod semidual;
pub mod stats;

pub use error::{Error, Result};
