//! Relay beamforming and degrees-of-freedom simulation for the full-duplex
//! K-pair two-way interference channel.
//!
//! The crate builds interference nulling and neutralizing relay beamformers
//! for several relay configurations, simulates transmission slots end to end,
//! and estimates the sum degrees of freedom as the slope of sum rate against
//! `log2 P`.

pub mod beamforming;
pub mod dof;
pub mod error;
pub mod model;
pub mod numerics;
pub mod scenario;
pub mod scheme;
pub mod transceiver;
pub mod trial;

pub use error::{Error, Result};
