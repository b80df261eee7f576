//! Simulation event log and its `t_ms,event,node,detail` CSV form.
//!
//! `detail` is a `;`-separated list of `key=value` pairs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::dissemination::MsgId;
use crate::{Error, LocationId, NodeId, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryOutcome {
    Accepted,
    Duplicate,
    Expired,
}

impl DeliveryOutcome {
    fn as_str(self) -> &'static str {
        match self {
            DeliveryOutcome::Accepted => "accept",
            DeliveryOutcome::Duplicate => "duplicate",
            DeliveryOutcome::Expired => "expired",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LogEvent {
    Move {
        location: Option<LocationId>,
    },
    Caution {
        location: LocationId,
        risk: f64,
    },
    Scan,
    Discover {
        peer: NodeId,
        distance_m: f64,
        latency_ms: u64,
    },
    Transfer {
        to: NodeId,
        msg: MsgId,
        bytes: u64,
        done_ms: u64,
    },
    Deliver {
        from: NodeId,
        msg: MsgId,
        outcome: DeliveryOutcome,
        hop: u8,
        qualifying: bool,
        violation: bool,
    },
    TransferFailed {
        from: NodeId,
        msg: MsgId,
    },
    Incident {
        index: usize,
        msg: MsgId,
        severity: u8,
    },
    Expire {
        msg: MsgId,
    },
}

impl LogEvent {
    pub fn name(&self) -> &'static str {
        match self {
            LogEvent::Move { .. } => "move",
            LogEvent::Caution { .. } => "caution",
            LogEvent::Scan => "scan",
            LogEvent::Discover { .. } => "discover",
            LogEvent::Transfer { .. } => "transfer",
            LogEvent::Deliver { .. } => "deliver",
            LogEvent::TransferFailed { .. } => "fail",
            LogEvent::Incident { .. } => "incident",
            LogEvent::Expire { .. } => "expire",
        }
    }

    fn detail(&self) -> String {
        let mut s = String::new();
        match self {
            LogEvent::Move { location } => match location {
                Some(l) => write!(s, "loc={l}"),
                None => write!(s, "loc=none"),
            },
            LogEvent::Caution { location, risk } => write!(s, "loc={location};risk={risk}"),
            LogEvent::Scan => Ok(()),
            LogEvent::Discover {
                peer,
                distance_m,
                latency_ms,
            } => {
                write!(s, "peer={peer};dist_m={distance_m};latency_ms={latency_ms}")
            }
            LogEvent::Transfer {
                to,
                msg,
                bytes,
                done_ms,
            } => write!(s, "to={to};msg={msg};bytes={bytes};done_ms={done_ms}"),
            LogEvent::Deliver {
                from,
                msg,
                outcome,
                hop,
                qualifying,
                violation,
            } => write!(
                s,
                "from={from};msg={msg};outcome={};hop={hop};qualifying={};violation={}",
                outcome.as_str(),
                *qualifying as u8,
                *violation as u8
            ),
            LogEvent::TransferFailed { from, msg } => write!(s, "from={from};msg={msg}"),
            LogEvent::Incident {
                index,
                msg,
                severity,
            } => write!(s, "idx={index};msg={msg};severity={severity}"),
            LogEvent::Expire { msg } => write!(s, "msg={msg}"),
        }
        .expect("writing to a String");
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub t_ms: u64,
    pub node: NodeId,
    pub event: LogEvent,
}

pub type EventLog = Vec<LogRecord>;

pub fn write_event_log<W: Write>(writer: W, log: &[LogRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let io = |e: csv::Error| Error::io("<event log>", e.into());
    w.write_record(["t_ms", "event", "node", "detail"])
        .map_err(io)?;
    for r in log {
        w.write_record(&[
            r.t_ms.to_string(),
            r.event.name().to_string(),
            r.node.to_string(),
            r.event.detail(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<event log>", e))
}

pub fn read_event_log<R: Read>(reader: R) -> Result<EventLog> {
    let src = "<event log>";
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec
            .map_err(|e| Error::parse(src, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |m: String| Error::parse(src, line, m);
        if rec.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", rec.len())));
        }
        let t_ms: u64 = rec[0].parse().map_err(|e| bad(format!("t_ms: {e}")))?;
        let node: NodeId = rec[2].parse().map_err(|e| bad(format!("node: {e}")))?;
        let kv: BTreeMap<&str, &str> = rec[3]
            .split(';')
            .filter(|p| !p.is_empty())
            .filter_map(|p| p.split_once('='))
            .collect();
        let get = |k: &str| {
            kv.get(k)
                .copied()
                .ok_or_else(|| bad(format!("missing `{k}`")))
        };
        fn num<T: std::str::FromStr>(v: &str, k: &str, bad: &dyn Fn(String) -> Error) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            v.parse().map_err(|e| bad(format!("{k}: {e}")))
        }
        let msg = |k: &str| -> Result<MsgId> { get(k)?.parse().map_err(|e: String| bad(e)) };
        let flag = |k: &str| -> Result<bool> { Ok(get(k)? == "1") };
        let event = match &rec[1] {
            "move" => LogEvent::Move {
                location: match get("loc")? {
                    "none" => None,
                    v => Some(num(v, "loc", &bad)?),
                },
            },
            "caution" => LogEvent::Caution {
                location: num(get("loc")?, "loc", &bad)?,
                risk: num(get("risk")?, "risk", &bad)?,
            },
            "scan" => LogEvent::Scan,
            "discover" => LogEvent::Discover {
                peer: num(get("peer")?, "peer", &bad)?,
                distance_m: num(get("dist_m")?, "dist_m", &bad)?,
                latency_ms: num(get("latency_ms")?, "latency_ms", &bad)?,
            },
            "transfer" => LogEvent::Transfer {
                to: num(get("to")?, "to", &bad)?,
                msg: msg("msg")?,
                bytes: num(get("bytes")?, "bytes", &bad)?,
                done_ms: num(get("done_ms")?, "done_ms", &bad)?,
            },
            "deliver" => LogEvent::Deliver {
                from: num(get("from")?, "from", &bad)?,
                msg: msg("msg")?,
                outcome: match get("outcome")? {
                    "accept" => DeliveryOutcome::Accepted,
                    "duplicate" => DeliveryOutcome::Duplicate,
                    "expired" => DeliveryOutcome::Expired,
                    other => return Err(bad(format!("unknown outcome `{other}`"))),
                },
                hop: num(get("hop")?, "hop", &bad)?,
                qualifying: flag("qualifying")?,
                violation: flag("violation")?,
            },
            "fail" => LogEvent::TransferFailed {
                from: num(get("from")?, "from", &bad)?,
                msg: msg("msg")?,
            },
            "incident" => LogEvent::Incident {
                index: num(get("idx")?, "idx", &bad)?,
                msg: msg("msg")?,
                severity: num(get("severity")?, "severity", &bad)?,
            },
            "expire" => LogEvent::Expire { msg: msg("msg")? },
            other => return Err(bad(format!("unknown event `{other}`"))),
        };
        out.push(LogRecord { t_ms, node, event });
    }
    Ok(out)
}
