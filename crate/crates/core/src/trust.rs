//! Directional trust from encounter statistics.
//!
//! The score of peer `j` in node `i`'s view blends the pair's encounter
//! count and cumulative duration, each normalised by node `i`'s busiest
//! peer in that dimension:
//!
//! ```text
//! T(i,j) = a * M[i,j] / max_k M[i,k] + (1 - a) * D[i,j] / max_k D[i,k]
//! ```
//!
//! A node that never met anyone trusts no one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use bitflags::bitflags;
use serde::{Deserialize, Serialize};

use crate::encounter::{DurationMatrix, EncounterMatrices, EncounterMatrix};
use crate::{Error, NodeId, Result};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_FRIEND_THRESHOLD: f64 = 0.6;
pub const DEFAULT_ACQUAINTANCE_THRESHOLD: f64 = 0.2;

/// Trust value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrustScore(f64);

impl TrustScore {
    pub const ZERO: TrustScore = TrustScore(0.0);

    /// Clamps into `[0, 1]`.
    pub fn new(v: f64) -> Self {
        TrustScore(v.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Ordered `Stranger < Acquaintance < Friend`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TrustClass {
    Stranger,
    Acquaintance,
    Friend,
}

impl TrustClass {
    pub fn mask(self) -> ClassMask {
        match self {
            TrustClass::Friend => ClassMask::FRIEND,
            TrustClass::Acquaintance => ClassMask::ACQUAINTANCE,
            TrustClass::Stranger => ClassMask::STRANGER,
        }
    }
}

impl fmt::Display for TrustClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrustClass::Friend => "Friend",
            TrustClass::Acquaintance => "Acquaintance",
            TrustClass::Stranger => "Stranger",
        })
    }
}

/// Specialised-service role of a node, independent of trust class.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum ServiceTag {
    #[default]
    None,
    Medical,
    Security,
    Rescue,
    Vigil,
}

impl ServiceTag {
    pub fn mask(self) -> ServiceMask {
        match self {
            ServiceTag::None => ServiceMask::empty(),
            ServiceTag::Medical => ServiceMask::MEDICAL,
            ServiceTag::Security => ServiceMask::SECURITY,
            ServiceTag::Rescue => ServiceMask::RESCUE,
            ServiceTag::Vigil => ServiceMask::VIGIL,
        }
    }
}

impl fmt::Display for ServiceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ServiceTag::None => "None",
            ServiceTag::Medical => "Medical",
            ServiceTag::Security => "Security",
            ServiceTag::Rescue => "Rescue",
            ServiceTag::Vigil => "Vigil",
        })
    }
}

impl FromStr for ServiceTag {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "" => Ok(ServiceTag::None),
            "medical" => Ok(ServiceTag::Medical),
            "security" => Ok(ServiceTag::Security),
            "rescue" => Ok(ServiceTag::Rescue),
            "vigil" => Ok(ServiceTag::Vigil),
            other => Err(format!("unknown service tag `{other}`")),
        }
    }
}

bitflags! {
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
    pub struct ClassMask: u8 {
        const FRIEND = 1 << 0;
        const ACQUAINTANCE = 1 << 1;
        const STRANGER = 1 << 2;
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
    pub struct ServiceMask: u8 {
        const MEDICAL = 1 << 0;
        const SECURITY = 1 << 1;
        const RESCUE = 1 << 2;
        const VIGIL = 1 << 3;
    }
}

impl ClassMask {
    pub fn contains_class(self, class: TrustClass) -> bool {
        self.contains(class.mask())
    }
}

impl ServiceMask {
    pub fn contains_tag(self, tag: ServiceTag) -> bool {
        tag != ServiceTag::None && self.contains(tag.mask())
    }
}

/// Which peers may receive: any whose class is in `classes`, plus any
/// whose service tag is in `services`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrustFilter {
    pub classes: ClassMask,
    pub services: ServiceMask,
}

impl TrustFilter {
    pub fn new(classes: ClassMask, services: ServiceMask) -> Self {
        TrustFilter { classes, services }
    }

    pub fn admits(&self, class: TrustClass, tag: ServiceTag) -> bool {
        self.classes.contains_class(class) || self.services.contains_tag(tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrustParams {
    pub alpha: f64,
    pub friend_threshold: f64,
    pub acquaintance_threshold: f64,
}

impl Default for TrustParams {
    fn default() -> Self {
        TrustParams {
            alpha: DEFAULT_ALPHA,
            friend_threshold: DEFAULT_FRIEND_THRESHOLD,
            acquaintance_threshold: DEFAULT_ACQUAINTANCE_THRESHOLD,
        }
    }
}

impl TrustParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be in [0,1], got {}",
                self.alpha
            )));
        }
        check_thresholds(self.friend_threshold, self.acquaintance_threshold)
    }
}

fn check_thresholds(friend: f64, acquaintance: f64) -> Result<()> {
    if 0.0 <= acquaintance && acquaintance < friend && friend <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidThresholds {
            friend,
            acquaintance,
        })
    }
}

/// Blended, per-node-normalised trust of `j` in `i`'s view.
pub fn trust_score(
    counts: &EncounterMatrix,
    durations: &DurationMatrix,
    i: NodeId,
    j: NodeId,
    alpha: f64,
) -> TrustScore {
    let max_count = counts.row_max(i);
    let max_duration = durations.row_max(i);
    if max_count == 0 || max_duration == 0 {
        return TrustScore::ZERO;
    }
    let c = counts.get(i, j) as f64 / max_count as f64;
    let d = durations.get(i, j) as f64 / max_duration as f64;
    TrustScore::new(alpha * c + (1.0 - alpha) * d)
}

/// Friend at or above `friend`, Acquaintance at or above `acquaintance`.
pub fn classify(score: TrustScore, friend: f64, acquaintance: f64) -> Result<TrustClass> {
    check_thresholds(friend, acquaintance)?;
    Ok(classify_unchecked(score, friend, acquaintance))
}

fn classify_unchecked(score: TrustScore, friend: f64, acquaintance: f64) -> TrustClass {
    if score.value() >= friend {
        TrustClass::Friend
    } else if score.value() >= acquaintance {
        TrustClass::Acquaintance
    } else {
        TrustClass::Stranger
    }
}

/// One row of a node's trust report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrustEntry {
    pub peer: NodeId,
    pub score: TrustScore,
    pub class: TrustClass,
    pub service_tag: ServiceTag,
}

/// Frozen trust view of every node over a fixed node universe. Pairs that
/// never met are Strangers with score 0.
#[derive(Debug, Clone)]
pub struct TrustMatrix {
    params: TrustParams,
    nodes: BTreeSet<NodeId>,
    entries: BTreeMap<(NodeId, NodeId), (TrustScore, TrustClass)>,
    tags: BTreeMap<NodeId, ServiceTag>,
}

impl TrustMatrix {
    /// Builds the matrix over `nodes` plus every node present in `matrices`.
    pub fn build(
        matrices: &EncounterMatrices,
        nodes: impl IntoIterator<Item = NodeId>,
        tags: impl IntoIterator<Item = (NodeId, ServiceTag)>,
        params: TrustParams,
    ) -> Result<Self> {
        params.validate()?;
        let tags: BTreeMap<NodeId, ServiceTag> = tags
            .into_iter()
            .filter(|(_, t)| *t != ServiceTag::None)
            .collect();
        let mut universe: BTreeSet<NodeId> = nodes.into_iter().collect();
        universe.extend(matrices.counts.nodes());
        universe.extend(tags.keys().copied());

        let mut entries = BTreeMap::new();
        for i in matrices.counts.nodes() {
            for (j, _) in matrices.counts.row(i) {
                let s = trust_score(&matrices.counts, &matrices.durations, i, j, params.alpha);
                let c =
                    classify_unchecked(s, params.friend_threshold, params.acquaintance_threshold);
                entries.insert((i, j), (s, c));
            }
        }
        Ok(TrustMatrix {
            params,
            nodes: universe,
            entries,
            tags,
        })
    }

    pub fn params(&self) -> &TrustParams {
        &self.params
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn score(&self, i: NodeId, j: NodeId) -> TrustScore {
        self.entries.get(&(i, j)).map_or(TrustScore::ZERO, |e| e.0)
    }

    pub fn class(&self, i: NodeId, j: NodeId) -> TrustClass {
        self.entries
            .get(&(i, j))
            .map_or(TrustClass::Stranger, |e| e.1)
    }

    pub fn service_tag(&self, node: NodeId) -> ServiceTag {
        self.tags.get(&node).copied().unwrap_or_default()
    }

    pub fn admits(&self, i: NodeId, j: NodeId, filter: &TrustFilter) -> bool {
        i != j && filter.admits(self.class(i, j), self.service_tag(j))
    }

    /// Peers `i` may address under `filter`, excluding `i`.
    pub fn trusted_set(&self, i: NodeId, filter: &TrustFilter) -> BTreeSet<NodeId> {
        self.nodes
            .iter()
            .copied()
            .filter(|&j| self.admits(i, j, filter))
            .collect()
    }

    /// All peers of `i` by descending score, ties by peer id.
    pub fn report(&self, i: NodeId) -> Vec<TrustEntry> {
        let mut rows: Vec<TrustEntry> = self
            .nodes
            .iter()
            .copied()
            .filter(|&j| j != i)
            .map(|j| TrustEntry {
                peer: j,
                score: self.score(i, j),
                class: self.class(i, j),
                service_tag: self.service_tag(j),
            })
            .collect();
        rows.sort_by(|a, b| {
            b.score
                .value()
                .total_cmp(&a.score.value())
                .then(a.peer.cmp(&b.peer))
        });
        rows
    }

    /// `peer,score,class,service_tag` CSV for node `i`.
    pub fn write_report_csv<W: Write>(&self, i: NodeId, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let io = |e: csv::Error| Error::io("<trust>", e.into());
        w.write_record(["peer", "score", "class", "service_tag"])
            .map_err(io)?;
        for row in self.report(i) {
            w.write_record(&[
                row.peer.to_string(),
                format!("{:.6}", row.score.value()),
                row.class.to_string(),
                row.service_tag.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io("<trust>", e))
    }
}
