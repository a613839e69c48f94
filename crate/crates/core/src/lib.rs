//! Stark-probe quantum sensing: Hamiltonians, ground states, Fisher information
//! and finite-size scaling analysis.

pub mod config;
pub mod error;
pub mod fisher;
pub mod probe;
pub mod protocols;
pub mod report;
pub mod scaling;
pub mod spectral;
pub mod store;
pub mod sweep;

pub use error::{Error, Result};
