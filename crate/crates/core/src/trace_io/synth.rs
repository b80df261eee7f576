//! Synthetic campus worlds: community mobility, crime incidents and an
//! hourly density series, all drawn from seeded per-node streams.
//!
//! Mobility is time-slotted. Each node belongs to one community, and each
//! community owns a disjoint set of home locations. Per hour a node is
//! active with an hour-dependent probability; an active node sits at one
//! location per slot and relocates with probability `1 / mean_dwell_slots`
//! per slot, choosing a home location with probability `p_home`.
//! Encounters are the maximal runs of slots in which two active nodes share
//! a location.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::{
    write_communities, write_crime_log, write_density_series, write_encounters, CrimeRecord,
    DensitySample, EncounterEvent,
};
use crate::analytics::pearson;
use crate::rng::{global_rng, node_rng, Stream};
use crate::{Error, LocationId, NodeId, Result, SECS_PER_DAY, SECS_PER_HOUR};

/// Mobility slot length in seconds.
pub const SLOT_S: u64 = 60;

/// Crime/density correlation the default coupling is calibrated to.
pub const DEFAULT_TARGET_CORRELATION: f64 = 0.55;

const CRIME_TYPES: [&str; 5] = ["THEFT", "BURGLARY", "ASSAULT", "VANDALISM", "ROBBERY"];
const CRIME_UNIFORM_WEIGHT: f64 = 0.5;
const CRIME_PEAK_SIGMA_H: f64 = 2.0;
const DAYTIME_PEAK_HOUR: f64 = 14.0;
const DAYTIME_SIGMA_H: f64 = 4.0;

/// A crime that must appear in the generated log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledIncident {
    pub time_s: u64,
    pub location: LocationId,
    #[serde(default = "default_crime_type")]
    pub crime_type: String,
    /// Drawn uniformly from 0..=255 when absent.
    #[serde(default)]
    pub severity: Option<u8>,
}

fn default_crime_type() -> String {
    "INCIDENT".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticWorldConfig {
    pub n_nodes: u32,
    pub n_communities: u32,
    pub n_locations: u32,
    pub sim_duration_s: u64,
    pub p_home: f64,
    #[serde(default)]
    pub incident_schedule: Vec<ScheduledIncident>,
    pub rng_seed: u64,
    /// Background crimes sampled in addition to the schedule.
    #[serde(default = "default_n_crimes")]
    pub n_crimes: u32,
    #[serde(default = "default_dwell")]
    pub mean_dwell_slots: f64,
    /// Weight of the crime-shaped component in hourly activity. `None`
    /// calibrates it to [`DEFAULT_TARGET_CORRELATION`].
    #[serde(default)]
    pub density_coupling: Option<f64>,
}

fn default_n_crimes() -> u32 {
    2000
}

fn default_dwell() -> f64 {
    20.0
}

impl SyntheticWorldConfig {
    pub fn new(
        n_nodes: u32,
        n_communities: u32,
        n_locations: u32,
        sim_duration_s: u64,
        p_home: f64,
        rng_seed: u64,
    ) -> Self {
        SyntheticWorldConfig {
            n_nodes,
            n_communities,
            n_locations,
            sim_duration_s,
            p_home,
            incident_schedule: Vec::new(),
            rng_seed,
            n_crimes: default_n_crimes(),
            mean_dwell_slots: default_dwell(),
            density_coupling: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_nodes < 2 {
            return bad(format!("n_nodes must be >= 2, got {}", self.n_nodes));
        }
        if self.n_communities == 0 || self.n_communities > self.n_nodes {
            return bad(format!(
                "n_communities must be in 1..=n_nodes ({}), got {}",
                self.n_nodes, self.n_communities
            ));
        }
        if self.n_locations == 0 {
            return bad("n_locations must be >= 1".into());
        }
        if self.sim_duration_s < SLOT_S {
            return bad(format!("sim_duration_s must be >= {SLOT_S}"));
        }
        if !(0.0..=1.0).contains(&self.p_home) {
            return bad(format!("p_home must be in [0,1], got {}", self.p_home));
        }
        if self.mean_dwell_slots.is_nan() || self.mean_dwell_slots < 1.0 {
            return bad(format!(
                "mean_dwell_slots must be >= 1, got {}",
                self.mean_dwell_slots
            ));
        }
        if let Some(k) = self.density_coupling {
            if !(0.0..=1.0).contains(&k) {
                return bad(format!("density_coupling must be in [0,1], got {k}"));
            }
        }
        Ok(())
    }

    pub fn n_slots(&self) -> usize {
        (self.sim_duration_s / SLOT_S) as usize
    }

    /// Community of a node: contiguous blocks of ids.
    pub fn community_of(&self, node: NodeId) -> u32 {
        ((node.0 * self.n_communities as u64) / self.n_nodes as u64) as u32
    }

    pub fn home_locations(&self, community: u32) -> Vec<LocationId> {
        if self.n_locations >= self.n_communities {
            (0..self.n_locations)
                .filter(|l| l % self.n_communities == community)
                .map(LocationId)
                .collect()
        } else {
            vec![LocationId(community % self.n_locations)]
        }
    }

    pub fn coupling(&self) -> f64 {
        self.density_coupling
            .unwrap_or_else(|| calibrate_density_coupling(DEFAULT_TARGET_CORRELATION))
    }
}

/// Per-node location for each slot; `None` while the node is inactive.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilitySchedule {
    pub slot_s: u64,
    pub locations: Vec<Vec<Option<LocationId>>>,
}

impl MobilitySchedule {
    pub fn n_nodes(&self) -> usize {
        self.locations.len()
    }

    pub fn n_slots(&self) -> usize {
        self.locations.first().map_or(0, Vec::len)
    }

    pub fn location(&self, node: usize, slot: usize) -> Option<LocationId> {
        self.locations
            .get(node)
            .and_then(|s| s.get(slot))
            .copied()
            .flatten()
    }

    /// Encounter events: one per maximal run of shared-location slots.
    pub fn encounters(&self) -> Vec<EncounterEvent> {
        let n_slots = self.n_slots();
        let mut open: BTreeMap<(usize, usize), (usize, LocationId)> = BTreeMap::new();
        let mut events = Vec::new();
        let mut by_loc: BTreeMap<LocationId, Vec<usize>> = BTreeMap::new();

        let close = |pair: (usize, usize),
                     start: usize,
                     end: usize,
                     loc: LocationId,
                     events: &mut Vec<EncounterEvent>| {
            events.push(EncounterEvent {
                node_a: NodeId(pair.0 as u64),
                node_b: NodeId(pair.1 as u64),
                start: start as u64 * self.slot_s,
                duration: (end - start) as u64 * self.slot_s,
                location: loc,
            });
        };

        for slot in 0..n_slots {
            by_loc.clear();
            for (node, sched) in self.locations.iter().enumerate() {
                if let Some(loc) = sched[slot] {
                    by_loc.entry(loc).or_default().push(node);
                }
            }
            let mut current: BTreeMap<(usize, usize), LocationId> = BTreeMap::new();
            for (&loc, nodes) in &by_loc {
                for (i, &a) in nodes.iter().enumerate() {
                    for &b in &nodes[i + 1..] {
                        current.insert((a, b), loc);
                    }
                }
            }
            open.retain(|pair, (start, loc)| {
                if current.get(pair) == Some(loc) {
                    true
                } else {
                    close(*pair, *start, slot, *loc, &mut events);
                    false
                }
            });
            for (pair, loc) in current {
                open.entry(pair).or_insert((slot, loc));
            }
        }
        for (pair, (start, loc)) in open {
            close(pair, start, n_slots, loc, &mut events);
        }
        events.sort_by_key(|e| (e.start, e.node_a, e.node_b));
        events
    }

    /// Active nodes at each hour boundary, summed per hour of day.
    pub fn density(&self) -> Vec<DensitySample> {
        let slots_per_hour = (SECS_PER_HOUR / self.slot_s) as usize;
        let mut counts = [0u64; 24];
        for slot in (0..self.n_slots()).step_by(slots_per_hour.max(1)) {
            let hour = crate::hour_of_day(slot as u64 * self.slot_s) as usize;
            counts[hour] += self.locations.iter().filter(|s| s[slot].is_some()).count() as u64;
        }
        counts
            .iter()
            .enumerate()
            .map(|(h, &count)| DensitySample {
                hour_bin: h as u8,
                count,
            })
            .collect()
    }
}

/// Everything the generator emits.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub encounters: Vec<EncounterEvent>,
    pub crimes: Vec<CrimeRecord>,
    pub density: Vec<DensitySample>,
    pub communities: Vec<(NodeId, u32)>,
    pub schedule: MobilitySchedule,
}

impl SyntheticWorld {
    /// Writes `encounters.csv`, `crime.csv`, `density.csv` and `communities.csv`.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let create = |name: &str| {
            let p = dir.join(name);
            File::create(&p)
                .map(BufWriter::new)
                .map_err(|e| Error::io(p, e))
        };
        write_encounters(create("encounters.csv")?, &self.encounters)?;
        write_crime_log(create("crime.csv")?, &self.crimes)?;
        write_density_series(create("density.csv")?, &self.density)?;
        write_communities(create("communities.csv")?, &self.communities)?;
        Ok(())
    }

    pub fn community_map(&self) -> BTreeMap<NodeId, u32> {
        self.communities.iter().copied().collect()
    }
}

fn circular_hour_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(24.0);
    d.min(24.0 - d)
}

/// Expected share of background crimes falling in each hour bin: an even
/// mixture of uniform and a normal centred on midnight, wrapped onto the day.
pub fn expected_crime_hour_pmf() -> [f64; 24] {
    const STEPS: usize = 400;
    let norm = 1.0 / (CRIME_PEAK_SIGMA_H * (2.0 * std::f64::consts::PI).sqrt());
    let mut pmf = [0.0; 24];
    for (h, p) in pmf.iter_mut().enumerate() {
        let mut mass = 0.0;
        for s in 0..STEPS {
            let x = h as f64 + (s as f64 + 0.5) / STEPS as f64;
            for k in -3..=3 {
                let z = (x + 24.0 * k as f64) / CRIME_PEAK_SIGMA_H;
                mass += norm * (-0.5 * z * z).exp();
            }
        }
        *p = CRIME_UNIFORM_WEIGHT / 24.0 + (1.0 - CRIME_UNIFORM_WEIGHT) * mass / STEPS as f64;
    }
    pmf
}

/// Probability that a node is active during each hour of the day.
pub fn expected_activity(coupling: f64) -> [f64; 24] {
    let pmf = expected_crime_hour_pmf();
    let peak = pmf.iter().cloned().fold(f64::MIN, f64::max);
    let mut act = [0.0; 24];
    for (h, a) in act.iter_mut().enumerate() {
        let d = circular_hour_distance(h as f64 + 0.5, DAYTIME_PEAK_HOUR);
        let daytime = 0.1 + 0.8 * (-(d * d) / (2.0 * DAYTIME_SIGMA_H * DAYTIME_SIGMA_H)).exp();
        let crime_shaped = 0.1 + 0.8 * pmf[h] / peak;
        *a = (1.0 - coupling) * daytime + coupling * crime_shaped;
    }
    act
}

/// Coupling whose expected crime and density histograms have correlation
/// `target`. Solved by bisection; clamps to the ends of [0,1].
pub fn calibrate_density_coupling(target: f64) -> f64 {
    let pmf = expected_crime_hour_pmf();
    let r = |k: f64| pearson(&pmf, &expected_activity(k)).unwrap_or(0.0);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    if target <= r(lo) {
        return lo;
    }
    if target >= r(hi) {
        return hi;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if r(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn generate_schedule(
    cfg: &SyntheticWorldConfig,
    activity: &[f64; 24],
    seed: u64,
    stream: Stream,
) -> MobilitySchedule {
    let n_slots = cfg.n_slots();
    let slots_per_hour = (SECS_PER_HOUR / SLOT_S) as usize;
    let p_move = 1.0 / cfg.mean_dwell_slots;
    let all: Vec<LocationId> = (0..cfg.n_locations).map(LocationId).collect();

    let locations = (0..cfg.n_nodes as u64)
        .map(|n| {
            let node = NodeId(n);
            let home = cfg.home_locations(cfg.community_of(node));
            let away: Vec<LocationId> = all.iter().copied().filter(|l| !home.contains(l)).collect();
            let mut rng = node_rng(seed, node, stream);
            let pick = |rng: &mut crate::rng::SimRng| {
                let pool = if away.is_empty() || rng.random_bool(cfg.p_home) {
                    &home
                } else {
                    &away
                };
                pool[rng.random_range(0..pool.len())]
            };

            let mut loc: Option<LocationId> = None;
            let mut out = Vec::with_capacity(n_slots);
            for slot in 0..n_slots {
                if slot % slots_per_hour == 0 {
                    let hour = crate::hour_of_day(slot as u64 * SLOT_S) as usize;
                    if rng.random_bool(activity[hour]) {
                        if loc.is_none() {
                            loc = Some(pick(&mut rng));
                        }
                    } else {
                        loc = None;
                    }
                } else if loc.is_some() && rng.random_bool(p_move) {
                    loc = Some(pick(&mut rng));
                }
                out.push(loc);
            }
            out
        })
        .collect();
    MobilitySchedule {
        slot_s: SLOT_S,
        locations,
    }
}

fn generate_crimes(cfg: &SyntheticWorldConfig) -> Vec<CrimeRecord> {
    let mut rng = global_rng(cfg.rng_seed, Stream::Crime);
    let days = cfg.sim_duration_s.div_ceil(SECS_PER_DAY).max(1);
    let peak = Normal::new(0.0, CRIME_PEAK_SIGMA_H).expect("sigma is positive");
    // Hotspot skew: location l is drawn with weight 1/(l+1).
    let loc_dist = WeightedIndex::new((0..cfg.n_locations).map(|l| 1.0 / (l as f64 + 1.0)))
        .expect("n_locations >= 1");

    let mut records = Vec::with_capacity(cfg.n_crimes as usize + cfg.incident_schedule.len());
    for _ in 0..cfg.n_crimes {
        let day = rng.random_range(0..days);
        let hour = if rng.random_bool(CRIME_UNIFORM_WEIGHT) {
            rng.random_range(0.0..24.0)
        } else {
            peak.sample(&mut rng).rem_euclid(24.0)
        };
        let secs = ((hour * SECS_PER_HOUR as f64) as u64).min(SECS_PER_DAY - 1);
        records.push(CrimeRecord {
            timestamp: day * SECS_PER_DAY + secs,
            location: LocationId(loc_dist.sample(&mut rng) as u32),
            crime_type: CRIME_TYPES[rng.random_range(0..CRIME_TYPES.len())].to_string(),
            severity: rng.random(),
        });
    }
    for inc in &cfg.incident_schedule {
        records.push(CrimeRecord {
            timestamp: inc.time_s,
            location: inc.location,
            crime_type: inc.crime_type.clone(),
            severity: inc.severity.unwrap_or_else(|| rng.random()),
        });
    }
    records.sort_by(|a, b| {
        (a.timestamp, a.location, &a.crime_type, a.severity).cmp(&(
            b.timestamp,
            b.location,
            &b.crime_type,
            b.severity,
        ))
    });
    records
}

/// Generates a complete world. Identical configs give identical worlds.
pub fn generate_synthetic_world(cfg: &SyntheticWorldConfig) -> Result<SyntheticWorld> {
    cfg.validate()?;
    let activity = expected_activity(cfg.coupling());
    let schedule = generate_schedule(cfg, &activity, cfg.rng_seed, Stream::Mobility);
    Ok(SyntheticWorld {
        encounters: schedule.encounters(),
        crimes: generate_crimes(cfg),
        density: schedule.density(),
        communities: (0..cfg.n_nodes as u64)
            .map(|n| (NodeId(n), cfg.community_of(NodeId(n))))
            .collect(),
        schedule,
    })
}

/// A fresh mobility schedule for the same world, keyed by `seed` instead of
/// the world's own seed. Used for the simulated period after the history.
pub fn continuation_schedule(
    cfg: &SyntheticWorldConfig,
    duration_s: u64,
    seed: u64,
) -> Result<MobilitySchedule> {
    cfg.validate()?;
    let mut c = cfg.clone();
    c.sim_duration_s = duration_s.max(SLOT_S);
    let activity = expected_activity(c.coupling());
    Ok(generate_schedule(&c, &activity, seed, Stream::SimMobility))
}
