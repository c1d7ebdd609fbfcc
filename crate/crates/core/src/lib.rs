//! Simulation and analysis of distributed-subarray millimeter-wave massive
//! MIMO links: clustered multipath channels, beam-steering precoding,
//! closed-form ergodic rates and diversity–multiplexing tradeoff curves,
//! plus a seeded Monte Carlo harness that checks them against each other.

pub mod array;
pub mod beamforming;
pub mod channel;
pub mod cli;
pub mod closedform;
pub mod error;
pub mod montecarlo;
pub mod rng;
pub mod validate;

pub use error::{Error, Result};
