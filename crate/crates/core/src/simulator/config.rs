use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::advisory::CautionPolicy;
use crate::dissemination::{MessageFilter, MessageKind, MAX_PAYLOAD};
use crate::protocol::{EnergyParams, LinkParams, ScanPolicy};
use crate::trace_io::{CrimeRecord, EncounterEvent, SyntheticWorldConfig};
use crate::trust::{ServiceTag, TrustParams};
use crate::{Error, LocationId, NodeId, Result};

pub const DEFAULT_AVAILABILITY_DEADLINE_S: f64 = 120.0;

/// Where nodes, their encounter history and the crime log come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorldSource {
    /// Generated world. Its trace is the trust history; the simulated
    /// period uses a fresh mobility draw keyed by the run seed.
    Synthetic(SyntheticWorldConfig),
    /// Encounter trace replay: nodes sit at an encounter's location while
    /// it lasts and are absent otherwise. Paths resolve against the config
    /// file's directory.
    Traces {
        encounters: PathBuf,
        #[serde(default)]
        crime: Option<PathBuf>,
    },
    /// Fixed placements with an inline history.
    Static(StaticWorld),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticWorld {
    pub nodes: Vec<StaticNode>,
    #[serde(default)]
    pub history: Vec<EncounterEvent>,
    #[serde(default)]
    pub crimes: Vec<CrimeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticNode {
    pub id: NodeId,
    pub location: LocationId,
    /// Metres within the location. Pairs lacking positions draw a distance
    /// per scan instead.
    #[serde(default)]
    pub position: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceAssignment {
    pub node: NodeId,
    pub tag: ServiceTag,
}

/// A victim raising a distress message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncidentSpec {
    pub time_s: u64,
    pub node: NodeId,
    #[serde(default = "default_kind")]
    pub kind: MessageKind,
    #[serde(default = "default_severity")]
    pub severity: u8,
    #[serde(default)]
    pub payload: String,
    /// Replaces the kind's default recipient filter.
    #[serde(default)]
    pub filter: Option<MessageFilter>,
}

fn default_kind() -> MessageKind {
    MessageKind::Emergency
}

fn default_severity() -> u8 {
    128
}

fn default_deadline() -> f64 {
    DEFAULT_AVAILABILITY_DEADLINE_S
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub duration_s: u64,
    pub world: WorldSource,
    #[serde(default)]
    pub scan: ScanPolicy,
    #[serde(default)]
    pub link: LinkParams,
    #[serde(default)]
    pub energy: EnergyParams,
    #[serde(default)]
    pub trust: TrustParams,
    #[serde(default)]
    pub caution: CautionPolicy,
    #[serde(default)]
    pub services: Vec<ServiceAssignment>,
    #[serde(default)]
    pub incidents: Vec<IncidentSpec>,
    #[serde(default = "default_deadline")]
    pub availability_deadline_s: f64,
}

impl SimConfig {
    pub fn new(seed: u64, duration_s: u64, world: WorldSource) -> Self {
        SimConfig {
            seed,
            duration_s,
            world,
            scan: ScanPolicy::default(),
            link: LinkParams::default(),
            energy: EnergyParams::default(),
            trust: TrustParams::default(),
            caution: CautionPolicy::default(),
            services: Vec::new(),
            incidents: Vec::new(),
            availability_deadline_s: DEFAULT_AVAILABILITY_DEADLINE_S,
        }
    }

    /// Reads a JSON config and resolves trace paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: SimConfig = serde_json::from_str(&text)?;
        if let WorldSource::Traces { encounters, crime } = &mut cfg.world {
            let base = path.parent().unwrap_or(Path::new("."));
            *encounters = base.join(&*encounters);
            if let Some(c) = crime {
                *c = base.join(&*c);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration_s == 0 {
            return Err(Error::InvalidConfig("duration_s must be > 0".into()));
        }
        self.scan.validate()?;
        self.link.validate()?;
        self.energy.validate()?;
        self.trust.validate()?;
        CautionPolicy::new(self.caution.threshold)?;
        if self.availability_deadline_s.is_nan() || self.availability_deadline_s < 0.0 {
            return Err(Error::InvalidConfig(
                "availability_deadline_s must be >= 0".into(),
            ));
        }
        match &self.world {
            WorldSource::Synthetic(w) => w.validate()?,
            WorldSource::Traces { encounters, crime } => {
                for p in std::iter::once(encounters).chain(crime) {
                    if !p.exists() {
                        return Err(Error::InvalidConfig(format!(
                            "referenced file {} does not exist",
                            p.display()
                        )));
                    }
                }
            }
            WorldSource::Static(s) => {
                let mut ids = BTreeSet::new();
                for n in &s.nodes {
                    if !ids.insert(n.id) {
                        return Err(Error::InvalidConfig(format!(
                            "duplicate static node {}",
                            n.id
                        )));
                    }
                    if let Some(p) = n.position {
                        if !p.iter().all(|v| v.is_finite()) {
                            return Err(Error::InvalidConfig(format!(
                                "node {} has a non-finite position",
                                n.id
                            )));
                        }
                    }
                }
            }
        }
        for (i, inc) in self.incidents.iter().enumerate() {
            if inc.payload.len() > MAX_PAYLOAD {
                return Err(Error::InvalidConfig(format!(
                    "incident {i}: payload longer than {MAX_PAYLOAD} bytes"
                )));
            }
        }
        Ok(())
    }
}
