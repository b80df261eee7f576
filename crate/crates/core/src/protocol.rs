//! Context-aware scanning, the short-range link model and energy accounting.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, NodeId, Result};

/// Size of one distress frame on the wire.
pub const MESSAGE_BYTES: usize = 184;

/// Scan interval as a function of local risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanPolicy {
    /// Interval at risk 1.
    pub i_min_s: f64,
    /// Interval at risk 0.
    pub i_max_s: f64,
    /// Interval while the node holds a live distress message.
    #[serde(rename = "emergency_s")]
    pub emergency_interval_s: f64,
}

impl Default for ScanPolicy {
    fn default() -> Self {
        ScanPolicy {
            i_min_s: 10.0,
            i_max_s: 120.0,
            emergency_interval_s: 1.0,
        }
    }
}

impl ScanPolicy {
    /// Scans at `i_min_s` regardless of risk.
    pub fn fixed(interval_s: f64, emergency_interval_s: f64) -> Self {
        ScanPolicy {
            i_min_s: interval_s,
            i_max_s: interval_s,
            emergency_interval_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if 0.0 <= self.emergency_interval_s
            && self.emergency_interval_s <= self.i_min_s
            && self.i_min_s <= self.i_max_s
        {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "scan policy needs 0 <= emergency_s ({}) <= i_min_s ({}) <= i_max_s ({})",
                self.emergency_interval_s, self.i_min_s, self.i_max_s
            )))
        }
    }

    /// Linear in risk between `i_max_s` (risk 0) and `i_min_s` (risk 1).
    pub fn scan_interval(&self, risk: f64, emergency_active: bool) -> f64 {
        if emergency_active {
            return self.emergency_interval_s;
        }
        let risk = risk.clamp(0.0, 1.0);
        self.i_max_s - risk * (self.i_max_s - self.i_min_s)
    }
}

/// Hard-cutoff discovery range with uniform scan latency and an affine
/// connection-plus-transfer time for a 184-byte frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkParams {
    pub range_m: f64,
    pub scan_min_s: f64,
    pub scan_max_s: f64,
    pub c0_s: f64,
    pub c1_s_per_m: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            range_m: 50.0,
            scan_min_s: 6.0,
            scan_max_s: 10.0,
            c0_s: 7.0,
            c1_s_per_m: 0.06,
        }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        if self.range_m.is_nan() || self.range_m <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "link.range_m must be > 0, got {}",
                self.range_m
            )));
        }
        if !(0.0 <= self.scan_min_s && self.scan_min_s <= self.scan_max_s) {
            return Err(Error::InvalidConfig(format!(
                "link scan latency needs 0 <= scan_min_s ({}) <= scan_max_s ({})",
                self.scan_min_s, self.scan_max_s
            )));
        }
        if self.c0_s < 0.0 || self.c1_s_per_m < 0.0 {
            return Err(Error::InvalidConfig(
                "link.c0_s and link.c1_s_per_m must be >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn in_range(&self, distance_m: f64) -> Result<bool> {
        if distance_m < 0.0 || distance_m.is_nan() {
            return Err(Error::NegativeDistance(distance_m));
        }
        Ok(distance_m <= self.range_m)
    }

    fn reachable(&self, distance_m: f64) -> bool {
        distance_m >= 0.0 && distance_m <= self.range_m
    }

    /// Time to discover a peer, or `None` if it is out of range.
    pub fn scan_latency<R: Rng + ?Sized>(&self, distance_m: f64, rng: &mut R) -> Option<f64> {
        if !self.reachable(distance_m) {
            return None;
        }
        Some(rng.random_range(self.scan_min_s..=self.scan_max_s))
    }

    /// Connection plus transfer time for `n_bytes`, or `None` if out of
    /// range or there is nothing to send.
    pub fn transfer_time(&self, distance_m: f64, n_bytes: usize) -> Option<f64> {
        if !self.reachable(distance_m) || n_bytes == 0 {
            return None;
        }
        Some((self.c0_s + self.c1_s_per_m * distance_m) * n_bytes as f64 / MESSAGE_BYTES as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyParams {
    pub e_scan: f64,
    pub e_byte: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            e_scan: 1.0,
            e_byte: 0.01,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        if self.e_scan < 0.0 || self.e_byte < 0.0 {
            return Err(Error::InvalidConfig("energy constants must be >= 0".into()));
        }
        Ok(())
    }

    pub fn units(&self, scans: u64, bytes: u64) -> f64 {
        self.e_scan * scans as f64 + self.e_byte * bytes as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Charge {
    Scan,
    Transfer(usize),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeEnergy {
    pub scans_performed: u64,
    pub bytes_transferred: u64,
}

/// Per-node activity counters. Energy is derived from the integer counters,
/// so totals do not depend on the order in which charges arrive.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyLedger {
    params: EnergyParams,
    nodes: BTreeMap<NodeId, NodeEnergy>,
}

impl EnergyLedger {
    pub fn new(params: EnergyParams) -> Self {
        EnergyLedger {
            params,
            nodes: BTreeMap::new(),
        }
    }

    pub fn charge(&mut self, node: NodeId, event: Charge) {
        let e = self.nodes.entry(node).or_default();
        match event {
            Charge::Scan => e.scans_performed += 1,
            Charge::Transfer(n) => e.bytes_transferred += n as u64,
        }
    }

    /// Makes `node` appear in reports even if it never spends anything.
    pub fn register(&mut self, node: NodeId) {
        self.nodes.entry(node).or_default();
    }

    pub fn counters(&self, node: NodeId) -> NodeEnergy {
        self.nodes.get(&node).copied().unwrap_or_default()
    }

    pub fn energy_units(&self, node: NodeId) -> f64 {
        let c = self.counters(node);
        self.params.units(c.scans_performed, c.bytes_transferred)
    }

    pub fn per_node(&self) -> BTreeMap<NodeId, f64> {
        self.nodes
            .keys()
            .map(|&n| (n, self.energy_units(n)))
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.per_node().values().sum()
    }
}
