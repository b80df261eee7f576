//! Crime-risk advisory: location x hour-of-day risk built from crime logs.
//!
//! Each record contributes `1 + severity/255` to its `(location, hour)`
//! cell; the profile is the raw table divided by its global maximum.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::trace_io::CrimeRecord;
use crate::{Error, LocationId, Result};

pub const DEFAULT_CAUTION_THRESHOLD: f64 = 0.5;

/// Normalised risk per location and hour. Unknown locations have zero risk.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RiskProfile {
    risk: BTreeMap<LocationId, [f64; 24]>,
    /// Earliest and latest record timestamps, if any.
    window: Option<(u64, u64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CautionPolicy {
    pub threshold: f64,
}

impl Default for CautionPolicy {
    fn default() -> Self {
        CautionPolicy {
            threshold: DEFAULT_CAUTION_THRESHOLD,
        }
    }
}

impl CautionPolicy {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidConfig(format!(
                "caution threshold must be in [0,1], got {threshold}"
            )));
        }
        Ok(CautionPolicy { threshold })
    }
}

/// Which hours to average over when ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HourSelector {
    Hour(u8),
    AllHours,
}

/// Severity-weighted sums per cell, before normalisation.
pub fn raw_weights(records: &[CrimeRecord]) -> BTreeMap<LocationId, [f64; 24]> {
    // Summed in units of 1/255 so the result is exact and order-free.
    let mut raw: BTreeMap<LocationId, [u64; 24]> = BTreeMap::new();
    for r in records {
        raw.entry(r.location).or_insert([0; 24])[r.hour() as usize] += 255 + r.severity as u64;
    }
    raw.into_iter()
        .map(|(loc, row)| (loc, row.map(|v| v as f64 / 255.0)))
        .collect()
}

pub fn build_risk_profile(records: &[CrimeRecord]) -> RiskProfile {
    let mut risk = raw_weights(records);
    let max = risk
        .values()
        .flat_map(|row| row.iter().copied())
        .fold(0.0_f64, f64::max);
    if max > 0.0 {
        for row in risk.values_mut() {
            for v in row.iter_mut() {
                *v /= max;
            }
        }
    }
    let window = records
        .iter()
        .map(|r| r.timestamp)
        .fold(None, |acc: Option<(u64, u64)>, t| {
            Some(acc.map_or((t, t), |(lo, hi)| (lo.min(t), hi.max(t))))
        });
    RiskProfile { risk, window }
}

impl RiskProfile {
    pub fn is_empty(&self) -> bool {
        self.risk.is_empty()
    }

    pub fn window(&self) -> Option<(u64, u64)> {
        self.window
    }

    pub fn locations(&self) -> impl Iterator<Item = LocationId> + '_ {
        self.risk.keys().copied()
    }

    pub fn row(&self, location: LocationId) -> Option<&[f64; 24]> {
        self.risk.get(&location)
    }

    /// Risk at `(location, hour)`; 0 for locations with no history.
    pub fn risk_score(&self, location: LocationId, hour: u32) -> Result<f64> {
        if hour >= 24 {
            return Err(Error::HourOutOfRange(hour));
        }
        Ok(self
            .risk
            .get(&location)
            .map_or(0.0, |row| row[hour as usize]))
    }

    /// Like [`risk_score`](Self::risk_score) for timestamps, which always map to a valid hour.
    pub fn risk_at(&self, location: LocationId, timestamp_s: u64) -> f64 {
        self.risk
            .get(&location)
            .map_or(0.0, |row| row[crate::hour_of_day(timestamp_s) as usize])
    }

    /// Locations by descending mean risk over the selected hours; ties by id.
    pub fn rank_locations(&self, hours: HourSelector) -> Vec<(LocationId, f64)> {
        let mut out: Vec<(LocationId, f64)> = self
            .risk
            .iter()
            .map(|(&loc, row)| {
                let agg = match hours {
                    HourSelector::Hour(h) => row[h as usize % 24],
                    HourSelector::AllHours => row.iter().sum::<f64>() / 24.0,
                };
                (loc, agg)
            })
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }

    pub fn is_cautionary(
        &self,
        policy: &CautionPolicy,
        location: LocationId,
        hour: u32,
    ) -> Result<bool> {
        Ok(self.risk_score(location, hour)? >= policy.threshold)
    }

    /// JSON object mapping each location id to its 24 hourly risks.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.risk
                .iter()
                .map(|(loc, row)| (loc.to_string(), serde_json::json!(row.to_vec())))
                .collect(),
        )
    }

    /// `location,aggregate_risk` CSV.
    pub fn write_ranking_csv<W: Write>(&self, hours: HourSelector, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let io = |e: csv::Error| Error::io("<rank>", e.into());
        w.write_record(["location", "aggregate_risk"]).map_err(io)?;
        for (loc, agg) in self.rank_locations(hours) {
            w.write_record(&[loc.to_string(), format!("{agg:.6}")])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io("<rank>", e))
    }
}
