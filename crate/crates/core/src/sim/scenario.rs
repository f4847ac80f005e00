//! Declarative simulation input, loaded from TOML:
//!
//! ```toml
//! [sim]
//! seed = 42
//! preset = "LF135"      # LF135 | HF1356 | UHF900
//! dt = 0.01
//! duration = 20.0
//! speed = 1.0           # walking speed for waypoints without one and for steering
//! refresh = 1.0         # re-inventory interval in seconds, 0 disables
//!
//! [[tags]]
//! id = "110055B53A"
//! x = 3.0
//! y = 0.0
//! class = 0             # 0..=4
//! power = "passive"     # passive | active
//! kill_code = 0
//!
//! [[path]]
//! x = 0.0
//! y = 0.0
//! speed = 1.0
//!
//! [registry]
//! file = "registry.tsv" # relative to the scenario file
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::air::{Point, ReaderPreset};
use crate::tag::{TagClass, TagId, TagPower};

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_WALK_SPEED: f64 = 1.0;
pub const DEFAULT_PRESENCE_REFRESH: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagSpec {
    pub id: TagId,
    pub position: Point,
    pub class: TagClass,
    pub power: TagPower,
    pub kill_code: u16,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub position: Point,
    /// Speed used while walking towards this waypoint.
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub preset: ReaderPreset,
    pub dt: f64,
    pub duration: f64,
    pub walk_speed: f64,
    /// Re-inventory interval for tags that stay in the field; `None`
    /// reads each tag once per field change.
    pub presence_refresh: Option<f64>,
    pub tags: Vec<TagSpec>,
    pub path: Vec<Waypoint>,
    pub registry: Option<PathBuf>,
}

impl Scenario {
    /// An empty scenario with default settings.
    pub fn new(seed: u64, preset: ReaderPreset, duration: f64) -> Self {
        Scenario {
            seed,
            preset,
            dt: DEFAULT_DT,
            duration,
            walk_speed: DEFAULT_WALK_SPEED,
            presence_refresh: Some(DEFAULT_PRESENCE_REFRESH),
            tags: Vec::new(),
            path: Vec::new(),
            registry: None,
        }
    }

    pub fn with_tag(
        mut self,
        id: TagId,
        position: Point,
        class: TagClass,
        power: TagPower,
    ) -> Self {
        self.tags.push(TagSpec {
            id,
            position,
            class,
            power,
            kill_code: 0,
        });
        self
    }

    pub fn with_waypoint(mut self, position: Point, speed: f64) -> Self {
        self.path.push(Waypoint { position, speed });
        self
    }

    /// Number of fixed steps the scenario runs for.
    pub fn steps(&self) -> u64 {
        (self.duration / self.dt - 1e-9).ceil().max(0.0) as u64
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |msg: String| Err(ScenarioError::Invalid(msg));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return invalid(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.walk_speed.is_finite() && self.walk_speed >= 0.0) {
            return invalid(format!(
                "speed must be non-negative, got {}",
                self.walk_speed
            ));
        }
        if let Some(r) = self.presence_refresh {
            if !(r.is_finite() && r > 0.0) {
                return invalid(format!("refresh must be positive, got {r}"));
            }
        }
        let mut seen = BTreeSet::new();
        for tag in &self.tags {
            if !seen.insert(tag.id) {
                return invalid(format!("duplicate tag id {}", tag.id));
            }
            if !tag.position.is_finite() {
                return invalid(format!("tag {} has a non-finite position", tag.id));
            }
        }
        for (i, wp) in self.path.iter().enumerate() {
            if !wp.position.is_finite() {
                return invalid(format!("waypoint {i} has a non-finite position"));
            }
            if !(wp.speed.is_finite() && wp.speed >= 0.0) {
                return invalid(format!("waypoint {i} speed must be non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    sim: RawSim,
    #[serde(default)]
    tags: Vec<RawTag>,
    #[serde(default)]
    path: Vec<RawWaypoint>,
    registry: Option<RawRegistry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_preset")]
    preset: String,
    #[serde(default = "default_dt")]
    dt: f64,
    duration: f64,
    #[serde(default = "default_speed")]
    speed: f64,
    /// Seconds; 0 disables presence refresh.
    #[serde(default = "default_refresh")]
    refresh: f64,
}

fn default_preset() -> String {
    ReaderPreset::Lf135.name().to_string()
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_speed() -> f64 {
    DEFAULT_WALK_SPEED
}

fn default_refresh() -> f64 {
    DEFAULT_PRESENCE_REFRESH
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTag {
    id: String,
    x: f64,
    y: f64,
    #[serde(default)]
    class: u8,
    #[serde(default = "default_power")]
    power: TagPower,
    #[serde(default)]
    kill_code: u16,
}

fn default_power() -> TagPower {
    TagPower::Passive
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWaypoint {
    x: f64,
    y: f64,
    speed: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegistry {
    file: PathBuf,
}

/// Parses scenario TOML. A relative registry path is resolved against
/// `base_dir`.
pub fn parse_scenario(text: &str, base_dir: Option<&Path>) -> Result<Scenario, ScenarioError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let preset: ReaderPreset = raw
        .sim
        .preset
        .parse()
        .map_err(|e: crate::air::AirError| ScenarioError::Invalid(e.to_string()))?;
    let mut scenario = Scenario::new(raw.sim.seed, preset, raw.sim.duration);
    scenario.dt = raw.sim.dt;
    scenario.walk_speed = raw.sim.speed;
    scenario.presence_refresh = (raw.sim.refresh != 0.0).then_some(raw.sim.refresh);

    for t in raw.tags {
        let id =
            t.id.parse()
                .map_err(|e: crate::tag::TagError| ScenarioError::Invalid(e.to_string()))?;
        let class = TagClass::from_number(t.class)
            .ok_or_else(|| ScenarioError::Invalid(format!("tag {id}: class must be 0..=4")))?;
        scenario.tags.push(TagSpec {
            id,
            position: Point::new(t.x, t.y),
            class,
            power: t.power,
            kill_code: t.kill_code,
        });
    }
    scenario.path = raw
        .path
        .into_iter()
        .map(|w| Waypoint {
            position: Point::new(w.x, w.y),
            speed: w.speed.unwrap_or(raw.sim.speed),
        })
        .collect();
    scenario.registry = raw.registry.map(|r| match base_dir {
        Some(dir) if r.file.is_relative() => dir.join(r.file),
        _ => r.file,
    });
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text, path.parent())
}
