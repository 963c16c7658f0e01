//! Targeted estimation of interventional network means under network
//! autoregression, with competitors, variance estimators and a Monte Carlo
//! study harness.

pub mod competitors;
pub mod error;
pub mod harness;
pub mod inference;
pub mod initfit;
pub mod netgraph;
pub mod seeds;
pub mod semgen;
pub mod tmle;

pub use error::{Error, Result};
