//! Deterministic discrete-event simulation of a campus deployment.
//!
//! Time advances in integer milliseconds. Events sharing a timestamp run
//! in the order node moves, incident starts, transfer completions, scans,
//! message expiries, then by node id, then by scheduling order.
//!
//! A scan by a node at some location discovers every co-located peer in
//! range after a random scan latency. For each discovered peer and each
//! live message the node holds, the forwarding rule decides whether to
//! start a transfer; the frame lands after the scan latency plus the
//! link's transfer time, provided both ends are still at the same
//! location. Nodes holding a message they may still relay scan at the
//! emergency interval; others scan at the risk-adapted interval.

mod config;
mod engine;
mod log;
mod metrics;

pub use config::{
    IncidentSpec, ServiceAssignment, SimConfig, StaticNode, StaticWorld, WorldSource,
    DEFAULT_AVAILABILITY_DEADLINE_S,
};
pub use engine::{run, run_with_log, SimOutput};
pub use log::{read_event_log, write_event_log, DeliveryOutcome, EventLog, LogEvent, LogRecord};
pub use metrics::{compute_metrics, IncidentOutcome, MetricsParams, MetricsReport};

impl SimConfig {
    pub fn metrics_params(&self) -> MetricsParams {
        MetricsParams {
            energy: self.energy,
            availability_deadline_s: self.availability_deadline_s,
        }
    }
}
