//! Slot-level simulator of a mobile IAB node riding a bus through a grid of
//! three IAB donors, comparing RSRP-only and load-aware topology adaptation.

pub mod channel;
pub mod config;
pub mod error;
pub mod geom;
pub mod mac;
pub mod metrics;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod topology;
pub mod traffic;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use sim::{run, sweep, RunOutput, Simulation, SlotReport};
pub use topology::TaPolicy;
