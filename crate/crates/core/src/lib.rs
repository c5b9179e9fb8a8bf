//! Uplink performance of an 802.11ax heterogeneous BSS with hidden terminals.
//!
//! The crate has two halves that share one parameter set and one topology:
//!
//! - a deterministic discrete-event simulator of per-STA EDCA contention,
//!   RTS/CTS single-user exchanges, STA-initiated MU-MIMO TXOP sharing and
//!   AP trigger-based uplink ([`mac::Simulation`]);
//! - a closed-form model of channel access and hidden-node collision
//!   probability solved by damped fixed-point iteration ([`analytic`]).
//!
//! [`scenario`] ties both together into the three experiments (load sweep
//! with hidden nodes, load sweep without them, association CSTH sweep) and
//! writes CSV and SVG artifacts.

pub mod analytic;
pub mod config_file;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod mac;
pub mod metrics;
pub mod params;
#[cfg(feature = "plot")]
pub mod plot;
pub mod scenario;

pub use error::{Error, Result};
pub use params::{default_config, SimConfig};

/// Simulation time in integer microseconds.
pub type Micros = u64;

/// Number of EDCA access categories. Index 3 is the highest priority.
pub const AC_COUNT: usize = 4;
