//! CSV trace formats and the synthetic world generator.
//!
//! All formats are UTF-8 CSV with a mandatory header row:
//!
//! | file              | header                                  |
//! |-------------------|-----------------------------------------|
//! | encounters        | `node_a,node_b,start,duration,location` |
//! | crime log         | `timestamp,location,crime_type,severity`|
//! | density series    | `hour,count`                            |
//! | community map     | `node,community`                        |

mod synth;

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{hour_of_day, Error, LocationId, NodeId, Result};

pub use synth::{
    calibrate_density_coupling, continuation_schedule, expected_activity, expected_crime_hour_pmf,
    generate_synthetic_world, MobilitySchedule, ScheduledIncident, SyntheticWorld,
    SyntheticWorldConfig, DEFAULT_TARGET_CORRELATION, SLOT_S,
};

pub const ENCOUNTER_HEADER: [&str; 5] = ["node_a", "node_b", "start", "duration", "location"];
pub const CRIME_HEADER: [&str; 4] = ["timestamp", "location", "crime_type", "severity"];
pub const DENSITY_HEADER: [&str; 2] = ["hour", "count"];
pub const COMMUNITY_HEADER: [&str; 2] = ["node", "community"];

/// One observed co-location of two devices. `node_a < node_b` always.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncounterEvent {
    pub node_a: NodeId,
    pub node_b: NodeId,
    pub start: u64,
    pub duration: u64,
    pub location: LocationId,
}

impl EncounterEvent {
    /// Builds a canonical event, swapping the endpoints if needed.
    pub fn new(
        a: NodeId,
        b: NodeId,
        start: u64,
        duration: u64,
        location: LocationId,
    ) -> Result<Self> {
        if a == b {
            return Err(Error::InvalidConfig(format!("self-encounter of node {a}")));
        }
        if duration == 0 {
            return Err(Error::InvalidConfig(
                "encounter duration must be > 0".into(),
            ));
        }
        let (node_a, node_b) = if a < b { (a, b) } else { (b, a) };
        Ok(EncounterEvent {
            node_a,
            node_b,
            start,
            duration,
            location,
        })
    }

    pub fn pair(&self) -> (NodeId, NodeId) {
        (self.node_a, self.node_b)
    }

    pub fn end(&self) -> u64 {
        self.start + self.duration
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrimeRecord {
    pub timestamp: u64,
    pub location: LocationId,
    pub crime_type: String,
    pub severity: u8,
}

impl CrimeRecord {
    pub fn hour(&self) -> u8 {
        hour_of_day(self.timestamp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensitySample {
    pub hour_bin: u8,
    pub count: u64,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader)
}

fn csv_writer<W: Write>(writer: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer)
}

/// Iterates data rows after checking the header, yielding `(line, record)`.
fn rows<R: Read>(
    reader: R,
    source: &str,
    header: &[&str],
) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut rdr = csv_reader(reader);
    let found = rdr
        .headers()
        .map_err(|e| Error::parse(source, 1, e.to_string()))?
        .clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::parse(
            source,
            1,
            format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(source, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != header.len() {
            return Err(Error::parse(
                source,
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    idx: usize,
    name: &str,
    source: &str,
    line: u64,
) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    rec[idx].parse::<T>().map_err(|e| {
        Error::parse(
            source,
            line,
            format!("field `{name}` = `{}`: {e}", &rec[idx]),
        )
    })
}

pub fn parse_encounter_trace(path: impl AsRef<Path>) -> Result<Vec<EncounterEvent>> {
    let path = path.as_ref();
    read_encounters(open(path)?, &path.display().to_string())
}

pub fn read_encounters<R: Read>(reader: R, source: &str) -> Result<Vec<EncounterEvent>> {
    let mut events = Vec::new();
    for (line, rec) in rows(reader, source, &ENCOUNTER_HEADER)? {
        let a: NodeId = field(&rec, 0, "node_a", source, line)?;
        let b: NodeId = field(&rec, 1, "node_b", source, line)?;
        let start: u64 = field(&rec, 2, "start", source, line)?;
        let duration: i64 = field(&rec, 3, "duration", source, line)?;
        let location: LocationId = field(&rec, 4, "location", source, line)?;
        if a == b {
            return Err(Error::parse(
                source,
                line,
                format!("self-encounter of node {a}"),
            ));
        }
        if duration <= 0 {
            return Err(Error::parse(
                source,
                line,
                format!("duration must be > 0, got {duration}"),
            ));
        }
        events.push(EncounterEvent::new(a, b, start, duration as u64, location)?);
    }
    events.sort_by_key(|e| e.start);
    Ok(events)
}

pub fn write_encounters<W: Write>(writer: W, events: &[EncounterEvent]) -> Result<()> {
    let mut w = csv_writer(writer);
    let io = |e: csv::Error| Error::io("<encounters>", e.into());
    w.write_record(ENCOUNTER_HEADER).map_err(io)?;
    for e in events {
        w.write_record(&[
            e.node_a.to_string(),
            e.node_b.to_string(),
            e.start.to_string(),
            e.duration.to_string(),
            e.location.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<encounters>", e))
}

pub fn parse_crime_log(path: impl AsRef<Path>) -> Result<Vec<CrimeRecord>> {
    let path = path.as_ref();
    read_crime_log(open(path)?, &path.display().to_string())
}

pub fn read_crime_log<R: Read>(reader: R, source: &str) -> Result<Vec<CrimeRecord>> {
    let mut records = Vec::new();
    for (line, rec) in rows(reader, source, &CRIME_HEADER)? {
        let timestamp: u64 = field(&rec, 0, "timestamp", source, line)?;
        let location: LocationId = field(&rec, 1, "location", source, line)?;
        let crime_type = rec[2].to_string();
        if crime_type.is_empty() {
            return Err(Error::parse(source, line, "empty crime_type"));
        }
        let severity: i64 = field(&rec, 3, "severity", source, line)?;
        if !(0..=255).contains(&severity) {
            return Err(Error::parse(
                source,
                line,
                format!("severity {severity} outside 0..=255"),
            ));
        }
        records.push(CrimeRecord {
            timestamp,
            location,
            crime_type,
            severity: severity as u8,
        });
    }
    records.sort_by_key(|r| r.timestamp);
    Ok(records)
}

pub fn write_crime_log<W: Write>(writer: W, records: &[CrimeRecord]) -> Result<()> {
    let mut w = csv_writer(writer);
    let io = |e: csv::Error| Error::io("<crime>", e.into());
    w.write_record(CRIME_HEADER).map_err(io)?;
    for r in records {
        w.write_record(&[
            r.timestamp.to_string(),
            r.location.to_string(),
            r.crime_type.clone(),
            r.severity.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<crime>", e))
}

/// Reads an hourly density series; hours absent from the file get count 0.
pub fn parse_density_series(path: impl AsRef<Path>) -> Result<Vec<DensitySample>> {
    let path = path.as_ref();
    read_density_series(open(path)?, &path.display().to_string())
}

pub fn read_density_series<R: Read>(reader: R, source: &str) -> Result<Vec<DensitySample>> {
    let mut counts: [Option<u64>; 24] = [None; 24];
    for (line, rec) in rows(reader, source, &DENSITY_HEADER)? {
        let hour: u32 = field(&rec, 0, "hour", source, line)?;
        let count: u64 = field(&rec, 1, "count", source, line)?;
        if hour >= 24 {
            return Err(Error::parse(
                source,
                line,
                format!("hour {hour} outside 0..24"),
            ));
        }
        let slot = &mut counts[hour as usize];
        if slot.is_some() {
            return Err(Error::parse(source, line, format!("duplicate hour {hour}")));
        }
        *slot = Some(count);
    }
    Ok(counts
        .iter()
        .enumerate()
        .map(|(h, c)| DensitySample {
            hour_bin: h as u8,
            count: c.unwrap_or(0),
        })
        .collect())
}

pub fn write_density_series<W: Write>(writer: W, samples: &[DensitySample]) -> Result<()> {
    let mut w = csv_writer(writer);
    let io = |e: csv::Error| Error::io("<density>", e.into());
    w.write_record(DENSITY_HEADER).map_err(io)?;
    for s in samples {
        w.write_record(&[s.hour_bin.to_string(), s.count.to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<density>", e))
}

pub fn parse_communities(path: impl AsRef<Path>) -> Result<Vec<(NodeId, u32)>> {
    let path = path.as_ref();
    let source = path.display().to_string();
    let mut out = Vec::new();
    for (line, rec) in rows(open(path)?, &source, &COMMUNITY_HEADER)? {
        out.push((
            field(&rec, 0, "node", &source, line)?,
            field(&rec, 1, "community", &source, line)?,
        ));
    }
    Ok(out)
}

pub fn write_communities<W: Write>(writer: W, communities: &[(NodeId, u32)]) -> Result<()> {
    let mut w = csv_writer(writer);
    let io = |e: csv::Error| Error::io("<communities>", e.into());
    w.write_record(COMMUNITY_HEADER).map_err(io)?;
    for (n, c) in communities {
        w.write_record(&[n.to_string(), c.to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<communities>", e))
}
