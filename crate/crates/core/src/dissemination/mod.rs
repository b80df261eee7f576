//! Distress messages: creation, forwarding decisions and receipt handling.
//!
//! Forwarding is trust-chain flooding. Every relay consults its own trust
//! view of the candidate, never the origin's.

mod wire;

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use wire::{
    DistressMessage, MessageFilter, MessageKind, MsgId, WireError, FRAME_LEN, HEADER_LEN,
    MAX_PAYLOAD, WIRE_VERSION,
};

use crate::trust::{ClassMask, ServiceMask, TrustMatrix};
use crate::{LocationId, NodeId};

/// Message ids a node has already accepted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeenSet {
    ids: HashSet<MsgId>,
}

impl SeenSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, id: &MsgId) -> bool {
        self.ids.contains(id)
    }

    /// Returns false if the id was already present.
    pub fn insert(&mut self, id: MsgId) -> bool {
        self.ids.insert(id)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Hop budget from severity: 1 + floor(severity / 64), so 1..=4.
pub fn max_hops_for(severity: u8) -> u8 {
    1 + severity / 64
}

/// Lifetime from severity: 300 s + 10 s per severity step.
pub fn ttl_for(severity: u8) -> u32 {
    300 + 10 * severity as u32
}

pub fn default_filter(kind: MessageKind) -> MessageFilter {
    match kind {
        MessageKind::Emergency => MessageFilter {
            classes: ClassMask::FRIEND | ClassMask::ACQUAINTANCE,
            service: true,
            services: ServiceMask::all(),
        },
        MessageKind::Alert => MessageFilter {
            classes: ClassMask::FRIEND,
            service: false,
            services: ServiceMask::empty(),
        },
    }
}

/// New message at hop 0 with severity-derived hop budget and lifetime and
/// the kind's default filter.
pub fn create_distress<R: Rng + ?Sized>(
    origin: NodeId,
    kind: MessageKind,
    severity: u8,
    location: LocationId,
    payload: &str,
    now_s: u64,
    rng: &mut R,
) -> Result<DistressMessage, WireError> {
    if payload.len() > MAX_PAYLOAD {
        return Err(WireError::PayloadTooLong(payload.len()));
    }
    if payload.as_bytes().last() == Some(&0) {
        return Err(WireError::PayloadTrailingNul);
    }
    let mut id = [0u8; 16];
    rng.fill(&mut id);
    Ok(DistressMessage {
        msg_id: MsgId(id),
        origin,
        kind,
        severity,
        hop_count: 0,
        max_hops: max_hops_for(severity),
        ttl_s: ttl_for(severity),
        created_at: now_s,
        filter: default_filter(kind),
        location,
        payload: payload.to_string(),
    })
}

/// Whether `relay` should hand `msg` to `candidate` now. `candidate_seen`
/// is the candidate's receipt record as exchanged while pairing.
pub fn should_forward(
    msg: &DistressMessage,
    relay: NodeId,
    candidate: NodeId,
    trust: &TrustMatrix,
    now_s: f64,
    candidate_seen: &SeenSet,
) -> bool {
    msg.is_live(now_s)
        && msg.hops_left()
        && relay != candidate
        && !candidate_seen.contains(&msg.msg_id)
        && trust.admits(relay, candidate, &msg.filter.trust_filter())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReceiveOutcome {
    /// First receipt; carries the stored copy with `hop_count` incremented.
    Accepted(DistressMessage),
    Duplicate,
    Expired,
}

impl ReceiveOutcome {
    pub fn label(&self) -> &'static str {
        match self {
            ReceiveOutcome::Accepted(_) => "accept",
            ReceiveOutcome::Duplicate => "duplicate",
            ReceiveOutcome::Expired => "expired",
        }
    }
}

/// Receipt of a relayed copy. Expired copies, and copies whose hop budget
/// was already spent by the sender, are dropped without touching `seen`.
pub fn on_receive(msg: &DistressMessage, seen: &mut SeenSet, now_s: f64) -> ReceiveOutcome {
    if !msg.is_live(now_s) || !msg.hops_left() {
        return ReceiveOutcome::Expired;
    }
    if !seen.insert(msg.msg_id) {
        return ReceiveOutcome::Duplicate;
    }
    let mut copy = msg.clone();
    copy.hop_count += 1;
    ReceiveOutcome::Accepted(copy)
}
