//! Subcommand implementations behind the `kinonav` binary: single-shot
//! planning, line-speed sweeps and expected-metric sidecars.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::planner::{plan, CollisionQuery, PlanError, PrimitiveTrajectory};
use crate::poly::PolyTrajectory;
use crate::refine::{max_deviation, refine_trajectory, BoundaryState};
use crate::scenario::{MissionKind, Scenario, ScenarioError};
use crate::sim::mission::{initial_map, poly_collision_free};
use crate::sim::{run_mission, MissionLog, MissionOutcome};
use crate::verify::metrics::{line_profile, line_stats, predicted_lag};
use crate::world::Aabb;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const INVALID: i32 = 2;
    pub const NO_PATH: i32 = 3;
    pub const COLLISION: i32 = 4;
    pub const TIMEOUT: i32 = 5;
    pub const ACCEPTANCE: i32 = 6;
}

pub fn scenario_exit_code(e: &ScenarioError) -> i32 {
    match e {
        ScenarioError::Io(_) => exit::IO,
        ScenarioError::Parse(_) | ScenarioError::Invalid(_) => exit::INVALID,
    }
}

pub fn plan_exit_code(e: &PlanError) -> i32 {
    if e.is_no_path() || matches!(e, PlanError::StartInCollision) {
        exit::NO_PATH
    } else {
        exit::INVALID
    }
}

pub fn mission_exit_code(outcome: MissionOutcome) -> i32 {
    match outcome {
        MissionOutcome::Reached | MissionOutcome::Completed => exit::OK,
        MissionOutcome::Collision => exit::COLLISION,
        MissionOutcome::Timeout => exit::TIMEOUT,
    }
}

/// Result of planning once from the scenario start.
#[derive(Debug, Clone)]
pub struct PlanReport {
    pub trajectory: PrimitiveTrajectory,
    pub expansions: usize,
    pub refined: Option<PolyTrajectory>,
    pub refine_error: Option<String>,
    pub max_deviation: f64,
    /// refined trajectory sampled at 0.01 s against the planning map
    pub refined_collision_free: bool,
    pub occupied_voxels: usize,
    pub planning_time: Duration,
}

impl PlanReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        let v0 = self.trajectory.start_state().map(|(_, v)| v);
        Some(match name {
            "cost" => self.trajectory.cost,
            "duration" => self.trajectory.duration,
            "expansions" => self.expansions as f64,
            "primitives" => self.trajectory.primitives.len() as f64,
            "max_deviation" => self.max_deviation,
            "refined_collision_free" => f64::from(u8::from(self.refined_collision_free)),
            "occupied_voxels" => self.occupied_voxels as f64,
            "start_vx" => v0?.x,
            "start_vy" => v0?.y,
            "start_vz" => v0?.z,
            _ => return None,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in [
            "cost",
            "duration",
            "expansions",
            "primitives",
            "max_deviation",
            "refined_collision_free",
            "occupied_voxels",
            "start_vx",
            "start_vy",
            "start_vz",
        ] {
            let _ = writeln!(s, "{key} = {}", self.metric(key).unwrap_or(f64::NAN));
        }
        if let Some(e) = &self.refine_error {
            let _ = writeln!(s, "refine_error = \"{e}\"");
        }
        s
    }

    /// Primitive and refined position/velocity/acceleration at `dt` steps.
    pub fn write_trajectory_csv<W: Write>(&self, mut w: W, dt: f64) -> io::Result<()> {
        writeln!(
            w,
            "t,x,y,z,vx,vy,vz,ax,ay,az,ref_x,ref_y,ref_z,ref_vx,ref_vy,ref_vz,ref_ax,ref_ay,ref_az"
        )?;
        for t in crate::planner::sample_times(self.trajectory.duration, dt) {
            let (p, v, a) = self.trajectory.sample(t);
            let mut line = format!("{t}");
            for c in p.iter().chain(v.iter()).chain(a.iter()) {
                let _ = write!(line, ",{c}");
            }
            for k in 0..3 {
                match self.refined.as_ref().map(|poly| poly.eval(t, k)) {
                    Some(Ok(x)) => x.iter().for_each(|c| {
                        let _ = write!(line, ",{c}");
                    }),
                    _ => line.push_str(",NaN,NaN,NaN"),
                }
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Builds the start map, plans once and refines.
pub fn plan_once(sc: &Scenario) -> Result<PlanReport, PlanError> {
    let mut map = initial_map(sc);
    let radius = sc.planning_radius();
    map.enable_inflation_cache(radius);
    let q = CollisionQuery::new(&map, radius, sc.mission.unknown_as);
    let clock = Instant::now();
    let out = plan(
        &sc.start_position(),
        &sc.start_velocity(),
        &sc.goal_position(),
        sc.goal.tolerance,
        &q,
        &sc.planner,
    )?;
    let planning_time = clock.elapsed();
    let mut report = PlanReport {
        trajectory: out.trajectory,
        expansions: out.expansions,
        refined: None,
        refine_error: None,
        max_deviation: f64::NAN,
        refined_collision_free: false,
        occupied_voxels: map.occupied_count(),
        planning_time,
    };
    if report.trajectory.is_empty() {
        report.max_deviation = 0.0;
        report.refined_collision_free = true;
        return Ok(report);
    }
    let start = BoundaryState {
        position: sc.start_position(),
        velocity: sc.start_velocity(),
        ..Default::default()
    };
    match refine_trajectory(&report.trajectory, &start, &sc.refine) {
        Ok(poly) => {
            report.max_deviation = max_deviation(&report.trajectory, &poly, 0.01).unwrap_or(f64::NAN);
            report.refined_collision_free = poly_collision_free(&poly, &q, 0.01);
            report.refined = Some(poly);
        }
        Err(e) => report.refine_error = Some(e.to_string()),
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub speed: f64,
    pub drag_comp: bool,
    pub lag: f64,
    pub predicted_lag: f64,
    pub cruise_speed: f64,
    pub max_altitude_error: f64,
    pub outcome: MissionOutcome,
}

pub const SWEEP_HEADER: &str = "speed,drag_comp,lag,predicted_lag,cruise_speed,max_altitude_error,outcome";

impl SweepRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.speed,
            if self.drag_comp { "on" } else { "off" },
            self.lag,
            self.predicted_lag,
            self.cruise_speed,
            self.max_altitude_error,
            self.outcome.as_str()
        )
    }
}

/// Flies the scenario's line at every speed with and without drag
/// compensation. Runs are independent and execute in parallel.
pub fn sweep_lines(sc: &Scenario, speeds: &[f64]) -> Result<Vec<SweepRow>, String> {
    if sc.mission.kind != MissionKind::StraightLine {
        return Err("sweep needs a straight_line scenario".into());
    }
    let jobs: Vec<(f64, bool)> = speeds.iter().flat_map(|&v| [(v, false), (v, true)]).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(speed, comp)| {
                scope.spawn(move || {
                    let mut s = sc.clone();
                    s.mission.cruise_speed = speed;
                    s.control.drag_comp = comp;
                    let log = run_mission(&s).map_err(|e| e.to_string())?;
                    let stats = line_stats(&log.records, &line_profile(&s));
                    Ok(SweepRow {
                        speed,
                        drag_comp: comp,
                        lag: stats.lag,
                        predicted_lag: if comp { 0.0 } else { predicted_lag(&s.control, speed) },
                        cruise_speed: stats.cruise_speed,
                        max_altitude_error: stats.max_altitude_error,
                        outcome: log.outcome,
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SidecarCommand {
    Plan,
    Run,
}

/// Expected metrics stored next to a scenario as `<name>.expected.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub command: SidecarCommand,
    #[serde(default)]
    pub exit_code: Option<i32>,
    #[serde(default)]
    pub outcome: Option<String>,
    /// metric → inclusive upper bound
    #[serde(default)]
    pub max: BTreeMap<String, f64>,
    /// metric → inclusive lower bound
    #[serde(default)]
    pub min: BTreeMap<String, f64>,
    /// metric → exact value
    #[serde(default)]
    pub equal: BTreeMap<String, f64>,
    /// region the flown path must cross
    #[serde(default)]
    pub pass_through: Option<Aabb>,
}

pub fn sidecar_path(scenario: &Path) -> PathBuf {
    let stem = scenario.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    scenario.with_file_name(format!("{stem}.expected.toml"))
}

pub fn load_sidecar(path: &Path) -> Result<Sidecar, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SidecarResult {
    pub scenario: String,
    pub failures: Vec<String>,
}

fn check_bounds(sidecar: &Sidecar, metric: impl Fn(&str) -> Option<f64>, failures: &mut Vec<String>) {
    let mut get = |name: &str| {
        let v = metric(name);
        if v.is_none() {
            failures.push(format!("unknown metric {name}"));
        }
        v
    };
    let mut checks = Vec::new();
    for (name, bound) in &sidecar.max {
        if let Some(v) = get(name) {
            checks.push((v <= *bound, format!("{name} = {v} exceeds {bound}")));
        }
    }
    for (name, bound) in &sidecar.min {
        if let Some(v) = get(name) {
            checks.push((v >= *bound, format!("{name} = {v} below {bound}")));
        }
    }
    for (name, want) in &sidecar.equal {
        if let Some(v) = get(name) {
            checks.push((v == *want, format!("{name} = {v}, expected {want}")));
        }
    }
    failures.extend(checks.into_iter().filter(|(ok, _)| !ok).map(|(_, msg)| msg));
}

/// Runs the sidecar's command on the scenario and compares the metrics.
pub fn check_sidecar(sc: &Scenario, sidecar: &Sidecar) -> SidecarResult {
    let mut failures = Vec::new();
    let code = match sidecar.command {
        SidecarCommand::Plan => match plan_once(sc) {
            Ok(report) => {
                check_bounds(sidecar, |n| report.metric(n), &mut failures);
                exit::OK
            }
            Err(e) => plan_exit_code(&e),
        },
        SidecarCommand::Run => match run_mission(sc) {
            Ok(log) => {
                check_run(&log, sidecar, &mut failures);
                mission_exit_code(log.outcome)
            }
            Err(_) => exit::INVALID,
        },
    };
    if let Some(want) = sidecar.exit_code {
        if want != code {
            failures.push(format!("exit code {code}, expected {want}"));
        }
    }
    SidecarResult {
        scenario: sc.name.clone(),
        failures,
    }
}

fn check_run(log: &MissionLog, sidecar: &Sidecar, failures: &mut Vec<String>) {
    let summary = log.summary();
    if let Some(want) = &sidecar.outcome {
        if summary.outcome.as_str() != want {
            failures.push(format!("outcome {}, expected {want}", summary.outcome.as_str()));
        }
    }
    check_bounds(sidecar, |n| summary.metric(n), failures);
    if let Some(region) = &sidecar.pass_through {
        if !crate::verify::metrics::passes_through(&log.records, region) {
            failures.push("path never crosses the pass_through region".into());
        }
    }
}
