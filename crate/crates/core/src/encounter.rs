//! Encounter-count and encounter-duration matrices.

use std::collections::BTreeMap;
use std::io::Write;

use crate::trace_io::EncounterEvent;
use crate::{Error, NodeId, Result};

/// Sparse symmetric pair map. The diagonal is never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymmetricMatrix {
    rows: BTreeMap<NodeId, BTreeMap<NodeId, u64>>,
}

/// Number of encounters per pair.
pub type EncounterMatrix = SymmetricMatrix;
/// Cumulative encounter seconds per pair.
pub type DurationMatrix = SymmetricMatrix;

impl SymmetricMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `value` to both `(i,j)` and `(j,i)`. Ignores `i == j`.
    pub fn add(&mut self, i: NodeId, j: NodeId, value: u64) {
        if i == j {
            return;
        }
        *self.rows.entry(i).or_default().entry(j).or_insert(0) += value;
        *self.rows.entry(j).or_default().entry(i).or_insert(0) += value;
    }

    pub fn get(&self, i: NodeId, j: NodeId) -> u64 {
        self.rows
            .get(&i)
            .and_then(|r| r.get(&j))
            .copied()
            .unwrap_or(0)
    }

    /// Peers of `i` with their values, ascending by peer id.
    pub fn row(&self, i: NodeId) -> impl Iterator<Item = (NodeId, u64)> + '_ {
        self.rows
            .get(&i)
            .into_iter()
            .flat_map(|r| r.iter().map(|(&k, &v)| (k, v)))
    }

    pub fn row_max(&self, i: NodeId) -> u64 {
        self.row(i).map(|(_, v)| v).max().unwrap_or(0)
    }

    /// Nodes with at least one stored entry.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.rows.keys().copied()
    }

    /// Each unordered pair once, as `(a, b, value)` with `a < b`.
    pub fn pairs(&self) -> impl Iterator<Item = (NodeId, NodeId, u64)> + '_ {
        self.rows.iter().flat_map(|(&a, r)| {
            r.range(a..)
                .filter(move |(&b, _)| b != a)
                .map(move |(&b, &v)| (a, b, v))
        })
    }

    /// Sum over unordered pairs.
    pub fn total(&self) -> u64 {
        self.pairs().map(|(_, _, v)| v).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Both matrices, updated together.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EncounterMatrices {
    pub counts: EncounterMatrix,
    pub durations: DurationMatrix,
}

impl EncounterMatrices {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, ev: &EncounterEvent) {
        self.counts.add(ev.node_a, ev.node_b, 1);
        self.durations.add(ev.node_a, ev.node_b, ev.duration);
    }

    pub fn from_events<'a>(events: impl IntoIterator<Item = &'a EncounterEvent>) -> Self {
        let mut m = Self::new();
        for ev in events {
            m.record(ev);
        }
        m
    }

    pub fn pair_stats(&self, i: NodeId, j: NodeId) -> (u64, u64) {
        pair_stats(&self.counts, &self.durations, i, j)
    }

    /// Writes `node_a,node_b,count,duration_s`, one row per met pair.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let io = |e: csv::Error| Error::io("<matrix>", e.into());
        w.write_record(["node_a", "node_b", "count", "duration_s"])
            .map_err(io)?;
        for (a, b, count) in self.counts.pairs() {
            w.write_record(&[
                a.to_string(),
                b.to_string(),
                count.to_string(),
                self.durations.get(a, b).to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io("<matrix>", e))
    }
}

pub fn build_matrices(events: &[EncounterEvent]) -> (EncounterMatrix, DurationMatrix) {
    let m = EncounterMatrices::from_events(events);
    (m.counts, m.durations)
}

/// `(count, total_duration_s)` for a pair; `(0, 0)` if they never met.
pub fn pair_stats(
    counts: &EncounterMatrix,
    durations: &DurationMatrix,
    i: NodeId,
    j: NodeId,
) -> (u64, u64) {
    (counts.get(i, j), durations.get(i, j))
}

/// Peers of `i` by descending value, ties by ascending peer id.
pub fn rank_distribution(matrix: &SymmetricMatrix, i: NodeId) -> Vec<(NodeId, u64)> {
    let mut out: Vec<_> = matrix.row(i).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}
