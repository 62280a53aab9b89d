//! Uplink max-min throughput modelling for LoRa networks whose end devices
//! run on harvested energy.
//!
//! The crate is organised bottom-up:
//!
//! - [`phy`]: LoRa symbol counts, time on air, duty-cycle off time, noise and
//!   receiver sensitivity.
//! - [`geometry`]: random disk topologies with Rayleigh block fading.
//! - [`energy`]: power-beacon harvesting (linear and sigmoidal rectifier
//!   models) and the per-packet power budget.
//! - [`collision`]: overlap time between two harvest-then-transmit packets.
//! - [`interference`]: waveform correlation policies, SINR and rates.
//! - [`sf_alloc`]: spreading-factor assignment policies.
//! - [`optimizer`]: harvesting-time selection and max-min power control.
//! - [`harness`]: scenario configuration, Monte Carlo sweeps and CSV output.
//!
//! Everything inside the crate works in SI units (seconds, watts, metres)
//! and linear power ratios. dB and dBm only appear in configuration and in
//! reports.

pub mod collision;
pub mod energy;
mod error;
pub mod geometry;
pub mod harness;
pub mod interference;
pub mod optimizer;
pub mod phy;
pub mod sf_alloc;
pub mod units;

pub use collision::{CollisionMatrix, CollisionMode, TxWindow};
pub use energy::{EhModel, EhModelKind, EnergyState};
pub use error::{Error, Result, Stage};
pub use geometry::{GeometryConfig, Topology};
pub use harness::{ScenarioConfig, SweepResult, TrialResult};
pub use interference::{CorrelationPolicy, RateReport};
pub use optimizer::{EhTimeMode, EhTimePolicy, PowerSolution};
pub use phy::{PhyParams, SpreadingFactor};
pub use sf_alloc::{SfAssignment, SfPolicy};
