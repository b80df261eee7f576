//! Proximity-based emergency alerting built on encounter trust.
//!
//! Devices log Bluetooth-style encounters, turn encounter counts and
//! durations into directional trust classes, adapt their scan rate to
//! historical crime risk, and relay fixed-size distress frames only to
//! peers that pass the sender's trust filter.
//!
//! The crate is organised bottom-up:
//!
//! - [`trace_io`]: CSV trace formats and the synthetic world generator
//! - [`encounter`]: symmetric encounter-count and duration matrices
//! - [`trust`]: directional trust scores, classes and service tags
//! - [`advisory`]: location x hour risk profile from crime logs
//! - [`protocol`]: scan policy, short-range link model, energy ledger
//! - [`dissemination`]: 184-byte wire format and forwarding rules
//! - [`simulator`]: deterministic discrete-event engine and metrics
//! - [`analytics`]: hourly histograms and crime/density correlation

pub mod advisory;
pub mod analytics;
pub mod dissemination;
pub mod encounter;
pub mod error;
pub mod ids;
pub mod protocol;
pub mod rng;
pub mod simulator;
pub mod trace_io;
pub mod trust;

pub use error::{Error, Result};
pub use ids::{LocationId, NodeId};

/// Seconds in one hour-of-day bin.
pub const SECS_PER_HOUR: u64 = 3_600;
/// Seconds in one day.
pub const SECS_PER_DAY: u64 = 86_400;

/// Hour-of-day bin (0..24) of a timestamp in seconds.
pub fn hour_of_day(timestamp_s: u64) -> u8 {
    ((timestamp_s % SECS_PER_DAY) / SECS_PER_HOUR) as u8
}
