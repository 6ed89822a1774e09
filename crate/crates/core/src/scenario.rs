//! Scenario files: one TOML document describing the world, the mission and
//! every parameter block. Missing keys take documented defaults; unknown keys
//! are rejected with their path.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::ControlParams;
use crate::planner::PlannerParams;
use crate::refine::RefineParams;
use crate::sim::{NoiseParams, RateConfig, VehicleParams};
use crate::state::Vec3;
use crate::world::{GroundTruthEnv, LidarParams, UnknownPolicy};

#[derive(Debug)]
pub enum ScenarioError {
    Io(std::io::Error),
    Parse(String),
    /// every violation, each prefixed with its field path
    Invalid(Vec<String>),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io(e) => write!(f, "cannot read scenario: {e}"),
            Self::Parse(e) => write!(f, "cannot parse scenario: {e}"),
            Self::Invalid(errs) => {
                writeln!(f, "invalid scenario ({} problems):", errs.len())?;
                for e in errs {
                    writeln!(f, "  {e}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSpec {
    pub position: [f64; 3],
    #[serde(default)]
    pub velocity: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub position: [f64; 3],
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MissionKind {
    /// sense, map, plan and fly to the goal
    #[default]
    Navigate,
    /// open-loop trapezoidal line from start to goal; no sensing or planning
    StraightLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum YawMode {
    Fixed,
    #[default]
    Velocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReplanSeed {
    #[default]
    Reference,
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissionSpec {
    pub kind: MissionKind,
    /// s of simulated time
    pub timeout: f64,
    /// straight-line cruise speed, m/s
    pub cruise_speed: f64,
    /// straight-line ramp acceleration, m/s²
    pub ramp_accel: f64,
    /// straight-line: time flown after the profile ends, s
    pub settle_time: f64,
    /// speed below which the goal counts as reached, m/s
    pub goal_speed: f64,
    /// added to the robot radius for planning, m
    pub safety_margin: f64,
    pub yaw_mode: YawMode,
    pub replan_from: ReplanSeed,
    pub unknown_as: UnknownPolicy,
    pub refine: bool,
}

impl Default for MissionSpec {
    fn default() -> Self {
        Self {
            kind: MissionKind::Navigate,
            timeout: 300.0,
            cruise_speed: 5.0,
            ramp_accel: 4.0,
            settle_time: 3.0,
            goal_speed: 0.5,
            safety_margin: 0.3,
            yaw_mode: YawMode::Velocity,
            replan_from: ReplanSeed::Reference,
            unknown_as: UnknownPolicy::Free,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapSpec {
    /// voxel edge, m
    pub resolution: f64,
    /// `plan`: rasterise the ground truth instead of scanning
    pub prebuilt: bool,
    /// `plan`: scans taken at the start pose to build the map
    pub burst_scans: usize,
}

impl Default for MapSpec {
    fn default() -> Self {
        Self {
            resolution: 0.5,
            prebuilt: false,
            burst_scans: 80,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_radius")]
    pub robot_radius: f64,
    pub world: GroundTruthEnv,
    pub start: StartSpec,
    pub goal: GoalSpec,
    #[serde(default)]
    pub mission: MissionSpec,
    #[serde(default)]
    pub map: MapSpec,
    #[serde(default)]
    pub planner: PlannerParams,
    #[serde(default)]
    pub refine: RefineParams,
    #[serde(default)]
    pub control: ControlParams,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub noise: NoiseParams,
    #[serde(default)]
    pub rates: RateConfig,
    #[serde(default)]
    pub lidar: LidarParams,
}

fn default_radius() -> f64 {
    0.3
}

impl Scenario {
    pub fn start_position(&self) -> Vec3 {
        Vec3::from(self.start.position)
    }

    pub fn start_velocity(&self) -> Vec3 {
        Vec3::from(self.start.velocity)
    }

    pub fn goal_position(&self) -> Vec3 {
        Vec3::from(self.goal.position)
    }

    pub fn noise_seed(&self) -> u64 {
        self.noise.seed.unwrap_or(self.seed)
    }

    /// Radius used for map inflation during planning.
    pub fn planning_radius(&self) -> f64 {
        self.robot_radius + self.mission.safety_margin
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.name.trim().is_empty() {
            errs.push("name: must not be empty".into());
        }
        // TOML integers are signed 64-bit
        if self.seed > i64::MAX as u64 {
            errs.push("seed: must not exceed 2^63 - 1".into());
        }
        if self.noise.seed.is_some_and(|s| s > i64::MAX as u64) {
            errs.push("noise.seed: must not exceed 2^63 - 1".into());
        }
        if !(self.robot_radius > 0.0) {
            errs.push("robot_radius: must be positive".into());
        }
        errs.extend(self.world.validate("world"));
        let b = &self.world.bounds;
        let inside = |p: &[f64; 3]| (0..3).all(|i| p[i] > b.min[i] && p[i] < b.max[i]);
        if !inside(&self.start.position) {
            errs.push("start.position: must lie inside world.bounds".into());
        } else if self.world.clearance(&self.start_position()) < self.robot_radius {
            errs.push("start.position: robot overlaps an obstacle".into());
        }
        if self.start.velocity.iter().chain([&self.start.yaw]).any(|v| !v.is_finite()) {
            errs.push("start: velocity and yaw must be finite".into());
        }
        if !inside(&self.goal.position) {
            errs.push("goal.position: must lie inside world.bounds".into());
        }
        if !(self.goal.tolerance > 0.0) {
            errs.push("goal.tolerance: must be positive".into());
        }
        let m = &self.mission;
        for (v, name) in [
            (m.timeout, "timeout"),
            (m.cruise_speed, "cruise_speed"),
            (m.ramp_accel, "ramp_accel"),
            (m.goal_speed, "goal_speed"),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("mission.{name}: must be positive"));
            }
        }
        if !(m.settle_time >= 0.0) {
            errs.push("mission.settle_time: must be non-negative".into());
        }
        if !(m.safety_margin >= 0.0) {
            errs.push("mission.safety_margin: must be non-negative".into());
        }
        if !(self.map.resolution > 0.0 && self.map.resolution.is_finite()) {
            errs.push("map.resolution: must be positive".into());
        }
        errs.extend(self.planner.validate("planner"));
        errs.extend(self.refine.validate("refine"));
        errs.extend(self.control.validate("control"));
        errs.extend(self.vehicle.validate("vehicle"));
        errs.extend(self.noise.validate("noise"));
        errs.extend(self.rates.validate("rates"));
        errs.extend(self.lidar.validate("lidar"));
        errs
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let mut unknown = Vec::new();
        let de = toml::Deserializer::parse(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let scenario: Scenario = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
            .map_err(|e| ScenarioError::Parse(e.to_string()))?;
        if !unknown.is_empty() {
            return Err(ScenarioError::Invalid(
                unknown.into_iter().map(|p| format!("{p}: unknown key")).collect(),
            ));
        }
        let errs = scenario.validate();
        if errs.is_empty() {
            Ok(scenario)
        } else {
            Err(ScenarioError::Invalid(errs))
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(ScenarioError::Io)?;
    Scenario::from_toml_str(&text)
}
