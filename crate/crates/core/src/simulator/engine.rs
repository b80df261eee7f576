use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};

use log::debug;
use rand::Rng;

use super::config::{SimConfig, WorldSource};
use super::log::{DeliveryOutcome, EventLog, LogEvent, LogRecord};
use super::metrics::{incident_outcomes, IncidentRow, MetricsReport};
use crate::advisory::{build_risk_profile, RiskProfile};
use crate::dissemination::{
    create_distress, on_receive, should_forward, DistressMessage, MsgId, ReceiveOutcome, SeenSet,
    FRAME_LEN,
};
use crate::encounter::EncounterMatrices;
use crate::protocol::{Charge, EnergyLedger};
use crate::rng::{node_rng, SimRng, Stream};
use crate::trace_io::{
    continuation_schedule, generate_synthetic_world, parse_crime_log, parse_encounter_trace,
    CrimeRecord, EncounterEvent, MobilitySchedule,
};
use crate::trust::TrustMatrix;
use crate::{Error, LocationId, NodeId, Result};

/// Report plus the full event log of one run.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub report: MetricsReport,
    pub log: EventLog,
}

pub fn run(config: &SimConfig) -> Result<MetricsReport> {
    Ok(run_with_log(config)?.report)
}

pub fn run_with_log(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let world = PreparedWorld::prepare(config)?;
    Ok(Engine::new(config, world).run())
}

/// `(t_s, node, location)` presence changes.
type Positions = HashMap<NodeId, [f64; 2]>;
type Moves = Vec<(u64, NodeId, Option<LocationId>)>;

/// Everything resolved before t = 0.
struct PreparedWorld {
    nodes: Vec<NodeId>,
    positions: HashMap<NodeId, [f64; 2]>,
    /// Unordered.
    moves: Moves,
    trust: TrustMatrix,
    profile: RiskProfile,
}

fn schedule_moves(schedule: &MobilitySchedule) -> Moves {
    let mut out = Vec::new();
    for (n, slots) in schedule.locations.iter().enumerate() {
        let mut prev = None;
        for (s, &loc) in slots.iter().enumerate() {
            if s == 0 || loc != prev {
                out.push((s as u64 * schedule.slot_s, NodeId(n as u64), loc));
            }
            prev = loc;
        }
    }
    out
}

/// Presence implied by an encounter trace: a node is at the location of
/// the most recently started encounter covering the instant, else absent.
fn replay_moves(events: &[EncounterEvent]) -> Moves {
    let mut per_node: BTreeMap<NodeId, Vec<(u64, u64, LocationId)>> = BTreeMap::new();
    for e in events {
        for n in [e.node_a, e.node_b] {
            per_node
                .entry(n)
                .or_default()
                .push((e.start, e.end(), e.location));
        }
    }
    let mut out = Vec::new();
    for (node, ivs) in per_node {
        let bounds: BTreeSet<u64> = ivs.iter().flat_map(|&(s, e, _)| [s, e]).collect();
        let mut prev = None;
        for b in bounds {
            let cur = ivs
                .iter()
                .filter(|&&(s, e, _)| s <= b && b < e)
                .max_by(|x, y| x.0.cmp(&y.0).then(y.2.cmp(&x.2)))
                .map(|iv| iv.2);
            if cur != prev {
                out.push((b, node, cur));
                prev = cur;
            }
        }
    }
    out
}

impl PreparedWorld {
    fn prepare(cfg: &SimConfig) -> Result<Self> {
        let (nodes, history, crimes, moves, positions): (
            BTreeSet<NodeId>,
            Vec<EncounterEvent>,
            Vec<CrimeRecord>,
            Moves,
            Positions,
        ) = match &cfg.world {
            WorldSource::Synthetic(w) => {
                let world = generate_synthetic_world(w)?;
                let sched = continuation_schedule(w, cfg.duration_s, cfg.seed)?;
                let nodes = (0..w.n_nodes as u64).map(NodeId).collect();
                (
                    nodes,
                    world.encounters,
                    world.crimes,
                    schedule_moves(&sched),
                    HashMap::new(),
                )
            }
            WorldSource::Traces { encounters, crime } => {
                let events = parse_encounter_trace(encounters)?;
                let crimes = match crime {
                    Some(p) => parse_crime_log(p)?,
                    None => Vec::new(),
                };
                let nodes = events.iter().flat_map(|e| [e.node_a, e.node_b]).collect();
                let moves = replay_moves(&events);
                (nodes, events, crimes, moves, HashMap::new())
            }
            WorldSource::Static(s) => (
                s.nodes.iter().map(|n| n.id).collect(),
                s.history.clone(),
                s.crimes.clone(),
                s.nodes
                    .iter()
                    .map(|n| (0, n.id, Some(n.location)))
                    .collect(),
                s.nodes
                    .iter()
                    .filter_map(|n| n.position.map(|p| (n.id, p)))
                    .collect(),
            ),
        };
        for inc in &cfg.incidents {
            if !nodes.contains(&inc.node) {
                return Err(Error::InvalidConfig(format!(
                    "incident victim {} is not in the world",
                    inc.node
                )));
            }
        }
        for s in &cfg.services {
            if !nodes.contains(&s.node) {
                return Err(Error::InvalidConfig(format!(
                    "service node {} is not in the world",
                    s.node
                )));
            }
        }
        let trust = TrustMatrix::build(
            &EncounterMatrices::from_events(&history),
            nodes.iter().copied(),
            cfg.services.iter().map(|s| (s.node, s.tag)),
            cfg.trust,
        )?;
        Ok(PreparedWorld {
            nodes: nodes.into_iter().collect(),
            positions,
            moves,
            trust,
            profile: build_risk_profile(&crimes),
        })
    }
}

/// Dispatch order among events sharing a timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Rank {
    NodeMove = 0,
    IncidentStart = 1,
    TransferComplete = 2,
    ScanDue = 3,
    MessageExpire = 4,
}

#[derive(Debug)]
enum EventKind {
    NodeMove(Option<LocationId>),
    IncidentStart(usize),
    TransferComplete {
        from: NodeId,
        frame: Box<[u8; FRAME_LEN]>,
    },
    ScanDue {
        generation: u64,
    },
    MessageExpire(MsgId),
}

impl EventKind {
    fn rank(&self) -> Rank {
        match self {
            EventKind::NodeMove(_) => Rank::NodeMove,
            EventKind::IncidentStart(_) => Rank::IncidentStart,
            EventKind::TransferComplete { .. } => Rank::TransferComplete,
            EventKind::ScanDue { .. } => Rank::ScanDue,
            EventKind::MessageExpire(_) => Rank::MessageExpire,
        }
    }
}

#[derive(Debug)]
struct Scheduled {
    t_ms: u64,
    rank: Rank,
    node: NodeId,
    seq: u64,
    kind: EventKind,
}

impl Scheduled {
    fn key(&self) -> (u64, Rank, NodeId, u64) {
        (self.t_ms, self.rank, self.node, self.seq)
    }
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

struct NodeState {
    id: NodeId,
    location: Option<LocationId>,
    position: Option<[f64; 2]>,
    next_scan_ms: u64,
    scan_generation: u64,
    seen: SeenSet,
    held: Vec<DistressMessage>,
    link_rng: SimRng,
    msg_rng: SimRng,
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    trust: TrustMatrix,
    profile: RiskProfile,
    nodes: Vec<NodeState>,
    index: HashMap<NodeId, usize>,
    occupancy: BTreeMap<LocationId, BTreeSet<NodeId>>,
    queue: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
    in_flight: HashSet<(NodeId, NodeId, MsgId)>,
    origin_trusted: HashMap<MsgId, BTreeSet<NodeId>>,
    ledger: EnergyLedger,
    log: EventLog,
    // Live metric accumulation, independent of the log.
    report: MetricsReport,
    incidents: Vec<IncidentRow>,
    incident_of: HashMap<MsgId, usize>,
}

fn ms(seconds: f64) -> u64 {
    (seconds * 1000.0).round() as u64
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a SimConfig, world: PreparedWorld) -> Self {
        let mut ledger = EnergyLedger::new(cfg.energy);
        let nodes: Vec<NodeState> = world
            .nodes
            .iter()
            .map(|&id| {
                ledger.register(id);
                NodeState {
                    id,
                    location: None,
                    position: world.positions.get(&id).copied(),
                    next_scan_ms: 0,
                    scan_generation: 0,
                    seen: SeenSet::new(),
                    held: Vec::new(),
                    link_rng: node_rng(cfg.seed, id, Stream::Link),
                    msg_rng: node_rng(cfg.seed, id, Stream::Message),
                }
            })
            .collect();
        let index = nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let mut engine = Engine {
            cfg,
            trust: world.trust,
            profile: world.profile,
            nodes,
            index,
            occupancy: BTreeMap::new(),
            queue: BinaryHeap::new(),
            seq: 0,
            in_flight: HashSet::new(),
            origin_trusted: HashMap::new(),
            ledger,
            log: Vec::new(),
            report: MetricsReport {
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
            },
            incidents: Vec::new(),
            incident_of: HashMap::new(),
        };
        engine.seed_events(world.moves);
        engine
    }

    fn push(&mut self, t_ms: u64, node: NodeId, kind: EventKind) {
        self.seq += 1;
        let ev = Scheduled {
            t_ms,
            rank: kind.rank(),
            node,
            seq: self.seq,
            kind,
        };
        self.queue.push(Reverse(ev));
    }

    fn record(&mut self, t_ms: u64, node: NodeId, event: LogEvent) {
        self.log.push(LogRecord { t_ms, node, event });
    }

    fn seed_events(&mut self, mut moves: Moves) {
        moves.sort_by_key(|m| (m.0, m.1));
        let mut initial: BTreeMap<NodeId, Option<LocationId>> =
            self.nodes.iter().map(|n| (n.id, None)).collect();
        for &(t, node, loc) in &moves {
            if t == 0 {
                initial.insert(node, loc);
            }
        }
        for (node, loc) in initial {
            self.push(0, node, EventKind::NodeMove(loc));
            let risk = loc.map_or(0.0, |l| self.profile.risk_at(l, 0));
            let interval = self.scan_interval_ms(risk, false);
            let offset = node_rng(self.cfg.seed, node, Stream::ScanPhase).random_range(0..interval);
            let i = self.index[&node];
            self.nodes[i].next_scan_ms = offset;
            self.push(offset, node, EventKind::ScanDue { generation: 0 });
        }
        for (t, node, loc) in moves.into_iter().filter(|m| m.0 > 0) {
            self.push(t * 1000, node, EventKind::NodeMove(loc));
        }
        for (i, inc) in self.cfg.incidents.iter().enumerate() {
            self.push(inc.time_s * 1000, inc.node, EventKind::IncidentStart(i));
        }
    }

    fn scan_interval_ms(&self, risk: f64, emergency: bool) -> u64 {
        ms(self.cfg.scan.scan_interval(risk, emergency)).max(1)
    }

    fn run(mut self) -> SimOutput {
        let end_ms = self.cfg.duration_s * 1000;
        let mut last = 0;
        while let Some(Reverse(ev)) = self.queue.pop() {
            if ev.t_ms > end_ms {
                break;
            }
            debug_assert!(ev.t_ms >= last, "event time went backwards");
            last = ev.t_ms;
            match ev.kind {
                EventKind::NodeMove(loc) => self.on_move(ev.t_ms, ev.node, loc),
                EventKind::IncidentStart(i) => self.on_incident(ev.t_ms, i),
                EventKind::TransferComplete { from, frame } => {
                    self.on_transfer_complete(ev.t_ms, from, ev.node, &frame)
                }
                EventKind::ScanDue { generation } => self.on_scan(ev.t_ms, ev.node, generation),
                EventKind::MessageExpire(id) => self.on_expire(ev.t_ms, ev.node, id),
            }
        }
        debug!("simulation finished: {} log records", self.log.len());

        let mut report = self.report;
        report.energy_per_node = self.ledger.per_node();
        report.total_energy = report.energy_per_node.values().sum();
        let (outcomes, availability, mean) =
            incident_outcomes(self.incidents, self.cfg.availability_deadline_s);
        report.incidents = outcomes;
        report.availability = availability;
        report.mean_response_time_s = mean;
        SimOutput {
            report,
            log: self.log,
        }
    }

    fn on_move(&mut self, t_ms: u64, node: NodeId, loc: Option<LocationId>) {
        let i = self.index[&node];
        if let Some(old) = self.nodes[i].location {
            if let Some(set) = self.occupancy.get_mut(&old) {
                set.remove(&node);
            }
        }
        self.nodes[i].location = loc;
        self.record(t_ms, node, LogEvent::Move { location: loc });
        if let Some(l) = loc {
            self.occupancy.entry(l).or_default().insert(node);
            let risk = self.profile.risk_at(l, t_ms / 1000);
            if risk >= self.cfg.caution.threshold {
                self.report.caution_signals += 1;
                self.record(t_ms, node, LogEvent::Caution { location: l, risk });
            }
        }
    }

    /// Pulls the node's next scan forward to `t_ms`.
    fn wake(&mut self, t_ms: u64, i: usize) {
        let n = &mut self.nodes[i];
        if n.next_scan_ms > t_ms {
            n.scan_generation += 1;
            n.next_scan_ms = t_ms;
            let (id, generation) = (n.id, n.scan_generation);
            self.push(t_ms, id, EventKind::ScanDue { generation });
        }
    }

    fn on_incident(&mut self, t_ms: u64, index: usize) {
        let spec = &self.cfg.incidents[index];
        let i = self.index[&spec.node];
        let location = self.nodes[i].location.unwrap_or(LocationId(0));
        let mut msg = create_distress(
            spec.node,
            spec.kind,
            spec.severity,
            location,
            &spec.payload,
            t_ms / 1000,
            &mut self.nodes[i].msg_rng,
        )
        .expect("payload length checked by config validation");
        if let Some(f) = spec.filter {
            msg.filter = f;
        }
        let id = msg.msg_id;
        self.origin_trusted.insert(
            id,
            self.trust
                .trusted_set(spec.node, &msg.filter.trust_filter()),
        );
        self.incident_of.insert(id, self.incidents.len());
        self.incidents.push(IncidentRow {
            index,
            node: spec.node,
            t_ms,
            msg: id,
            first_qualifying_ms: None,
        });
        self.record(
            t_ms,
            spec.node,
            LogEvent::Incident {
                index,
                msg: id,
                severity: msg.severity,
            },
        );
        self.push(
            (msg.expires_at() + 1) * 1000,
            spec.node,
            EventKind::MessageExpire(id),
        );
        let node = &mut self.nodes[i];
        node.seen.insert(id);
        node.held.push(msg);
        self.wake(t_ms, i);
    }

    fn distance(&mut self, i: usize, j: usize) -> f64 {
        match (self.nodes[i].position, self.nodes[j].position) {
            (Some(a), Some(b)) => ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt(),
            _ => {
                let range = self.cfg.link.range_m;
                self.nodes[i].link_rng.random_range(0.0..=range)
            }
        }
    }

    fn on_scan(&mut self, t_ms: u64, node: NodeId, generation: u64) {
        let i = self.index[&node];
        if self.nodes[i].scan_generation != generation {
            return;
        }
        let now_s = t_ms as f64 / 1000.0;
        let location = self.nodes[i].location;

        if let Some(loc) = location {
            self.ledger.charge(node, Charge::Scan);
            self.report.scans += 1;
            self.record(t_ms, node, LogEvent::Scan);
            let peers: Vec<NodeId> = self.occupancy[&loc]
                .iter()
                .copied()
                .filter(|&p| p != node)
                .collect();
            for peer in peers {
                let j = self.index[&peer];
                let d = self.distance(i, j);
                let Some(latency) = self.cfg.link.scan_latency(d, &mut self.nodes[i].link_rng)
                else {
                    continue;
                };
                let latency_ms = ms(latency);
                self.report.encounters_detected += 1;
                self.record(
                    t_ms,
                    node,
                    LogEvent::Discover {
                        peer,
                        distance_m: d,
                        latency_ms,
                    },
                );

                let outgoing: Vec<DistressMessage> = self.nodes[i]
                    .held
                    .iter()
                    .filter(|m| {
                        !self.in_flight.contains(&(node, peer, m.msg_id))
                            && should_forward(
                                m,
                                node,
                                peer,
                                &self.trust,
                                now_s,
                                &self.nodes[j].seen,
                            )
                    })
                    .cloned()
                    .collect();
                for msg in outgoing {
                    let transfer = self
                        .cfg
                        .link
                        .transfer_time(d, FRAME_LEN)
                        .expect("peer was discovered, so it is in range");
                    let done_ms = t_ms + latency_ms + ms(transfer);
                    let frame = msg.encode().expect("held messages are valid");
                    self.ledger.charge(node, Charge::Transfer(FRAME_LEN));
                    self.report.messages_transmitted += 1;
                    self.in_flight.insert((node, peer, msg.msg_id));
                    self.record(
                        t_ms,
                        node,
                        LogEvent::Transfer {
                            to: peer,
                            msg: msg.msg_id,
                            bytes: FRAME_LEN as u64,
                            done_ms,
                        },
                    );
                    self.push(
                        done_ms,
                        peer,
                        EventKind::TransferComplete {
                            from: node,
                            frame: Box::new(frame),
                        },
                    );
                }
            }
        }

        let emergency = self.nodes[i]
            .held
            .iter()
            .any(|m| m.is_live(now_s) && m.hops_left());
        let risk = location.map_or(0.0, |l| self.profile.risk_at(l, t_ms / 1000));
        let next = t_ms + self.scan_interval_ms(risk, emergency);
        self.nodes[i].next_scan_ms = next;
        self.push(next, node, EventKind::ScanDue { generation });
    }

    fn on_transfer_complete(
        &mut self,
        t_ms: u64,
        from: NodeId,
        to: NodeId,
        frame: &[u8; FRAME_LEN],
    ) {
        let msg = DistressMessage::decode(frame).expect("frames are produced by encode");
        self.in_flight.remove(&(from, to, msg.msg_id));
        let (i, j) = (self.index[&from], self.index[&to]);
        let sender_at = self.nodes[i].location;
        if sender_at.is_none() || sender_at != self.nodes[j].location {
            self.report.failed_transfer_count += 1;
            self.record(
                t_ms,
                to,
                LogEvent::TransferFailed {
                    from,
                    msg: msg.msg_id,
                },
            );
            return;
        }

        let violation = !self.trust.admits(from, to, &msg.filter.trust_filter());
        let now_s = t_ms as f64 / 1000.0;
        let outcome = on_receive(&msg, &mut self.nodes[j].seen, now_s);
        let qualifying = matches!(outcome, ReceiveOutcome::Accepted(_))
            && self
                .origin_trusted
                .get(&msg.msg_id)
                .is_some_and(|s| s.contains(&to));
        if violation {
            self.report.privacy_violations += 1;
        }
        let (kind, hop) = match &outcome {
            ReceiveOutcome::Accepted(copy) => (DeliveryOutcome::Accepted, copy.hop_count),
            ReceiveOutcome::Duplicate => (DeliveryOutcome::Duplicate, msg.hop_count),
            ReceiveOutcome::Expired => (DeliveryOutcome::Expired, msg.hop_count),
        };
        self.record(
            t_ms,
            to,
            LogEvent::Deliver {
                from,
                msg: msg.msg_id,
                outcome: kind,
                hop,
                qualifying,
                violation,
            },
        );
        match outcome {
            ReceiveOutcome::Accepted(copy) => {
                self.report.delivery_count += 1;
                if qualifying {
                    self.report.qualifying_delivery_count += 1;
                    if let Some(&k) = self.incident_of.get(&copy.msg_id) {
                        self.incidents[k].first_qualifying_ms.get_or_insert(t_ms);
                    }
                }
                let relay = copy.hops_left();
                self.nodes[j].held.push(copy);
                if relay {
                    self.wake(t_ms, j);
                }
            }
            ReceiveOutcome::Duplicate => self.report.duplicate_count += 1,
            ReceiveOutcome::Expired => self.report.expired_drop_count += 1,
        }
    }

    fn on_expire(&mut self, t_ms: u64, origin: NodeId, id: MsgId) {
        for n in &mut self.nodes {
            n.held.retain(|m| m.msg_id != id);
        }
        self.record(t_ms, origin, LogEvent::Expire { msg: id });
    }
}
