//! Hybrid automatic neighbor relation (H-ANR) management for cellular
//! networks, with a behavioral model of distributed ANR and a deterministic
//! network simulator to drive it.

pub mod danr;
pub mod engine;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod netsim;
pub mod network;
