use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::log::{DeliveryOutcome, LogEvent, LogRecord};
use crate::dissemination::MsgId;
use crate::protocol::EnergyParams;
use crate::NodeId;

/// Constants needed to turn a log into a report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsParams {
    pub energy: EnergyParams,
    pub availability_deadline_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentOutcome {
    pub index: usize,
    pub node: NodeId,
    pub time_s: f64,
    pub msg_id: String,
    /// Incident to first qualifying delivery; absent unless within the deadline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_time_s: Option<f64>,
    pub available: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub incidents: Vec<IncidentOutcome>,
    /// Fraction of incidents available within the deadline (0 with no incidents).
    pub availability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_response_time_s: Option<f64>,
    pub delivery_count: u64,
    pub qualifying_delivery_count: u64,
    pub duplicate_count: u64,
    pub expired_drop_count: u64,
    pub failed_transfer_count: u64,
    pub messages_transmitted: u64,
    pub scans: u64,
    pub encounters_detected: u64,
    pub caution_signals: u64,
    pub energy_per_node: BTreeMap<NodeId, f64>,
    pub total_energy: f64,
    pub privacy_violations: u64,
}

impl MetricsReport {
    /// Canonical JSON form; identical runs give identical bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }
}

/// Shared tail of both metric routes: turns per-incident first-delivery
/// times and counters into a report.
pub(crate) struct IncidentRow {
    pub index: usize,
    pub node: NodeId,
    pub t_ms: u64,
    pub msg: MsgId,
    pub first_qualifying_ms: Option<u64>,
}

pub(crate) fn incident_outcomes(
    rows: Vec<IncidentRow>,
    deadline_s: f64,
) -> (Vec<IncidentOutcome>, f64, Option<f64>) {
    let mut outcomes: Vec<IncidentOutcome> = rows
        .into_iter()
        .map(|r| {
            let rt = r
                .first_qualifying_ms
                .map(|d| (d - r.t_ms) as f64 / 1000.0)
                .filter(|&s| s <= deadline_s);
            IncidentOutcome {
                index: r.index,
                node: r.node,
                time_s: r.t_ms as f64 / 1000.0,
                msg_id: r.msg.to_string(),
                response_time_s: rt,
                available: rt.is_some(),
            }
        })
        .collect();
    outcomes.sort_by_key(|o| o.index);
    let n = outcomes.len();
    let avail = outcomes.iter().filter(|o| o.available).count();
    let availability = if n == 0 { 0.0 } else { avail as f64 / n as f64 };
    let rts: Vec<f64> = outcomes.iter().filter_map(|o| o.response_time_s).collect();
    let mean = (!rts.is_empty()).then(|| rts.iter().sum::<f64>() / rts.len() as f64);
    (outcomes, availability, mean)
}

/// Rebuilds the metrics report from an event log alone.
pub fn compute_metrics(log: &[LogRecord], params: &MetricsParams) -> MetricsReport {
    let mut incidents: Vec<IncidentRow> = Vec::new();
    let mut by_msg: HashMap<MsgId, usize> = HashMap::new();
    let mut scans: BTreeMap<NodeId, u64> = BTreeMap::new();
    let mut bytes: BTreeMap<NodeId, u64> = BTreeMap::new();
    let mut r = MetricsReport {
        incidents: Vec::new(),
        availability: 0.0,
        mean_response_time_s: None,
        delivery_count: 0,
        qualifying_delivery_count: 0,
        duplicate_count: 0,
        expired_drop_count: 0,
        failed_transfer_count: 0,
        messages_transmitted: 0,
        scans: 0,
        encounters_detected: 0,
        caution_signals: 0,
        energy_per_node: BTreeMap::new(),
        total_energy: 0.0,
        privacy_violations: 0,
    };

    for rec in log {
        match &rec.event {
            LogEvent::Move { .. } => {
                scans.entry(rec.node).or_insert(0);
            }
            LogEvent::Caution { .. } => r.caution_signals += 1,
            LogEvent::Scan => {
                *scans.entry(rec.node).or_insert(0) += 1;
                r.scans += 1;
            }
            LogEvent::Discover { .. } => r.encounters_detected += 1,
            LogEvent::Transfer { bytes: b, .. } => {
                *bytes.entry(rec.node).or_insert(0) += b;
                r.messages_transmitted += 1;
            }
            LogEvent::Deliver {
                msg,
                outcome,
                qualifying,
                violation,
                ..
            } => {
                if *violation {
                    r.privacy_violations += 1;
                }
                match outcome {
                    DeliveryOutcome::Accepted => {
                        r.delivery_count += 1;
                        if *qualifying {
                            r.qualifying_delivery_count += 1;
                            if let Some(&i) = by_msg.get(msg) {
                                incidents[i].first_qualifying_ms.get_or_insert(rec.t_ms);
                            }
                        }
                    }
                    DeliveryOutcome::Duplicate => r.duplicate_count += 1,
                    DeliveryOutcome::Expired => r.expired_drop_count += 1,
                }
            }
            LogEvent::TransferFailed { .. } => r.failed_transfer_count += 1,
            LogEvent::Incident { index, msg, .. } => {
                by_msg.insert(*msg, incidents.len());
                incidents.push(IncidentRow {
                    index: *index,
                    node: rec.node,
                    t_ms: rec.t_ms,
                    msg: *msg,
                    first_qualifying_ms: None,
                });
            }
            LogEvent::Expire { .. } => {}
        }
    }

    let nodes: std::collections::BTreeSet<NodeId> =
        scans.keys().chain(bytes.keys()).copied().collect();
    for n in nodes {
        let e = params.energy.units(
            scans.get(&n).copied().unwrap_or(0),
            bytes.get(&n).copied().unwrap_or(0),
        );
        r.energy_per_node.insert(n, e);
    }
    r.total_energy = r.energy_per_node.values().sum();
    let (outcomes, availability, mean) =
        incident_outcomes(incidents, params.availability_deadline_s);
    r.incidents = outcomes;
    r.availability = availability;
    r.mean_response_time_s = mean;
    r
}
