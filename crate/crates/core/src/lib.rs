//! Car-to-cloud uplink traffic simulator.
//!
//! The pipeline runs at a fixed 1 s tick: vehicle trajectories (synthetic
//! Krauss car-following or imported traces) feed a Winner-II B1 link budget,
//! best-SNR cell association and Round-Robin resource-block scheduling. Each
//! vehicle packages one second of harmonized measurement-channel records
//! into a CVIM data package and drains its transmit queue against the
//! achieved uplink rate. The [`analysis`] module turns the per-tick results
//! into rate statistics, CDFs and resource-block provisioning plans.

pub mod analysis;
pub mod config;
pub mod cvim;
pub mod engine;
mod error;
mod ids;
pub mod linkrate;
pub mod mobility;
pub mod radio;
pub mod scheduler;

pub use error::{Error, Result};
pub use ids::{StationId, VehicleId};
