//! Multi-rate closed loop: lidar → map → planner → refinement → controller →
//! plant, scheduled on integer physics ticks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{control_step, Command};
use crate::planner::{plan, CollisionQuery, PlanError, PrimitiveTrajectory};
use crate::poly::PolyTrajectory;
use crate::refine::{max_deviation, refine_trajectory, BoundaryState};
use crate::scenario::{MissionKind, ReplanSeed, Scenario, YawMode};
use crate::sim::log::{ControlRecord, EventKind, MissionLog, MissionOutcome, PlanEvent};
use crate::sim::noise::{estimate, noise_rng};
use crate::sim::reference::{LineProfile, RefSample, Reference};
use crate::sim::vehicle::dynamics_step;
use crate::state::{FlatReference, RobotState, Rotation, Vec3};
use crate::world::{simulate_scan_rays, GroundTruthEnv, LidarParams, UnknownPolicy, VoxelMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RateConfig {
    pub control_hz: f64,
    pub scan_hz: f64,
    pub replan_hz: f64,
    /// physics substep, s
    pub physics_dt: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            control_hz: 200.0,
            scan_hz: 40.0,
            replan_hz: 3.0,
            physics_dt: 1e-3,
        }
    }
}

impl RateConfig {
    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut errs = Vec::new();
        for (v, name) in [
            (self.control_hz, "control_hz"),
            (self.scan_hz, "scan_hz"),
            (self.replan_hz, "replan_hz"),
            (self.physics_dt, "physics_dt"),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("{prefix}.{name}: must be positive"));
            }
        }
        if self.control_hz < self.replan_hz {
            errs.push(format!("{prefix}.replan_hz: must not exceed control_hz"));
        }
        if self.physics_dt * self.control_hz > 1.0 + 1e-12 {
            errs.push(format!("{prefix}.physics_dt: must not exceed 1/control_hz"));
        }
        errs
    }

    /// Physics ticks between events at `hz` (rounded, at least one).
    pub fn ticks(&self, hz: f64) -> u64 {
        ((1.0 / (hz * self.physics_dt)).round() as u64).max(1)
    }
}

#[derive(Debug, Error)]
pub enum MissionError {
    #[error("invalid scenario: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

/// Does the robot ball stay clear of the map along the polynomial?
pub fn poly_collision_free(poly: &PolyTrajectory, q: &CollisionQuery<'_>, dt: f64) -> bool {
    crate::planner::sample_times(poly.duration(), dt).all(|t| poly.eval(t, 0).is_ok_and(|p| !q.blocked(&p)))
}

/// Casts one lidar scan and inserts its hits (and, when tracked, the
/// observed free space) into `map`. Returns the number of hits.
pub fn scan_into(map: &mut VoxelMap, world: &GroundTruthEnv, state: &RobotState, t: f64, lidar: &LidarParams) -> usize {
    let rays = simulate_scan_rays(world, state, t, lidar);
    let mut hits = Vec::with_capacity(rays.len());
    for r in &rays {
        if map.tracks_observation() {
            map.mark_ray_observed(&r.origin, &r.direction, r.range.unwrap_or(lidar.max_range));
        }
        if let Some(p) = r.hit_point() {
            hits.push(p);
        }
    }
    map.insert_scan(&hits);
    hits.len()
}

/// Map of a scenario before take-off: the rasterised ground truth when
/// `map.prebuilt`, otherwise `map.burst_scans` scans from the start pose.
pub fn initial_map(sc: &Scenario) -> VoxelMap {
    if sc.map.prebuilt {
        return VoxelMap::rasterize(&sc.world, sc.map.resolution);
    }
    let mut map = VoxelMap::covering(&sc.world.bounds, sc.map.resolution);
    if sc.mission.unknown_as == UnknownPolicy::Occupied {
        map = map.with_observation_tracking();
    }
    let state = RobotState {
        position: sc.start_position(),
        velocity: sc.start_velocity(),
        orientation: Rotation::from_yaw(sc.start.yaw),
        time: 0.0,
    };
    let dt = 1.0 / sc.lidar.scan_rate;
    for k in 0..sc.map.burst_scans {
        scan_into(&mut map, &sc.world, &state, k as f64 * dt, &sc.lidar);
    }
    map
}

struct Runner<'a> {
    sc: &'a Scenario,
    map: VoxelMap,
    reference: Reference,
    plan_id: u32,
    events: Vec<PlanEvent>,
    unknown: UnknownPolicy,
    decel: f64,
}

impl Runner<'_> {
    fn event(&self, t: f64, kind: EventKind) -> PlanEvent {
        let mut e = PlanEvent::new(t, self.plan_id, kind);
        e.occupied_voxels = self.map.occupied_count();
        e
    }

    fn scan(&mut self, state: &RobotState, t: f64) {
        scan_into(&mut self.map, &self.sc.world, state, t, &self.sc.lidar);
    }

    fn replan(&mut self, t: f64, est: &RobotState) {
        let sc = self.sc;
        let seed_ref = self.reference.sample(t);
        let start = match sc.mission.replan_from {
            ReplanSeed::Reference => BoundaryState {
                position: seed_ref.position,
                velocity: seed_ref.velocity,
                acceleration: seed_ref.acceleration,
                jerk: seed_ref.jerk,
            },
            ReplanSeed::Estimate => BoundaryState {
                position: est.position,
                velocity: est.velocity,
                ..Default::default()
            },
        };
        let goal = sc.goal_position();
        let tol = sc.goal.tolerance;
        let mut q = CollisionQuery::new(&self.map, sc.planning_radius(), self.unknown);
        let mut result = plan(&start.position, &start.velocity, &goal, tol, &q, &sc.planner);
        let mut detail = String::new();
        if matches!(result, Err(PlanError::StartInCollision)) && sc.mission.safety_margin > 0.0 {
            // start lies inside the safety margin: plan out at the robot radius
            q = CollisionQuery::new(&self.map, sc.robot_radius, self.unknown);
            result = plan(&start.position, &start.velocity, &goal, tol, &q, &sc.planner);
            detail = "planned at robot radius".into();
        }
        match result {
            Ok(out) if out.trajectory.is_empty() => {
                let e = self.event(t, EventKind::PlanEmpty);
                self.events.push(e);
            }
            Ok(out) => {
                let (new_ref, deviation, fallback) = self.build_reference(&out.trajectory, &start, t, &q);
                self.plan_id += 1;
                if let Some(reason) = fallback {
                    let mut e = self.event(t, EventKind::RefineFallback);
                    e.detail = reason;
                    self.events.push(e);
                }
                let s = new_ref.sample(t);
                let mut e = self.event(t, EventKind::Plan);
                e.cost = out.trajectory.cost;
                e.expansions = out.expansions;
                e.duration = out.trajectory.duration;
                e.swap_pos_jump = (s.position - seed_ref.position).norm();
                e.swap_vel_jump = (s.velocity - seed_ref.velocity).norm();
                e.deviation = deviation;
                e.detail = detail;
                self.events.push(e);
                self.reference = new_ref;
            }
            Err(err) => {
                let mut e = self.event(t, EventKind::PlanFailed);
                e.expansions = match err {
                    PlanError::GoalUnreachable { expansions } => expansions,
                    PlanError::ExpansionLimit { limit } => limit,
                    _ => 0,
                };
                e.detail = if detail.is_empty() { err.to_string() } else { format!("{err} ({detail})") };
                self.events.push(e);
                if !matches!(self.reference, Reference::Stop { .. }) {
                    self.reference = Reference::Stop {
                        p: seed_ref.position,
                        v: seed_ref.velocity,
                        t0: t,
                        decel: self.decel,
                    };
                    let e = self.event(t, EventKind::EmergencyStop);
                    self.events.push(e);
                }
            }
        }
    }

    /// Refined reference when refinement succeeds and stays clear, otherwise
    /// the primitive chain (with the reason).
    fn build_reference(
        &self,
        traj: &PrimitiveTrajectory,
        start: &BoundaryState,
        t: f64,
        q: &CollisionQuery<'_>,
    ) -> (Reference, f64, Option<String>) {
        let primitive = Reference::Primitive {
            traj: traj.clone(),
            t0: t,
            decel: self.decel,
        };
        if !self.sc.mission.refine {
            return (primitive, f64::NAN, None);
        }
        match refine_trajectory(traj, start, &self.sc.refine) {
            Ok(poly) => {
                if !poly_collision_free(&poly, q, 0.01) {
                    return (primitive, f64::NAN, Some("refined trajectory collides".into()));
                }
                let dev = max_deviation(traj, &poly, 0.01).unwrap_or(f64::NAN);
                (
                    Reference::Poly {
                        traj: poly,
                        t0: t,
                        decel: self.decel,
                    },
                    dev,
                    None,
                )
            }
            Err(e) => (primitive, f64::NAN, Some(e.to_string())),
        }
    }
}

fn record(t: f64, state: &RobotState, est: &RobotState, r: &RefSample, cmd: &Command, plan_id: u32) -> ControlRecord {
    ControlRecord {
        t,
        true_pos: state.position,
        true_vel: state.velocity,
        est_pos: est.position,
        est_vel: est.velocity,
        ref_pos: r.position,
        ref_vel: r.velocity,
        ref_acc: r.acceleration,
        thrust: cmd.thrust,
        tilt_deg: state.orientation.tilt().to_degrees(),
        tracking_error: (state.position - r.position).norm(),
        plan_id,
    }
}

/// Runs a scenario to goal, collision, timeout or (straight-line) completion.
pub fn run_mission(sc: &Scenario) -> Result<MissionLog, MissionError> {
    let errs = sc.validate();
    if !errs.is_empty() {
        return Err(MissionError::Invalid(errs));
    }
    let rates = &sc.rates;
    let dt = rates.physics_dt;
    let (n_ctrl, n_scan, n_plan) = (rates.ticks(rates.control_hz), rates.ticks(rates.scan_hz), rates.ticks(rates.replan_hz));
    let navigate = sc.mission.kind == MissionKind::Navigate;
    let goal = sc.goal_position();
    let start = sc.start_position();
    let start_vel = sc.start_velocity();

    let unknown = sc.mission.unknown_as;
    let mut map = if navigate {
        initial_map(sc)
    } else {
        VoxelMap::covering(&sc.world.bounds, sc.map.resolution)
    };
    if navigate {
        map.enable_inflation_cache(sc.planning_radius());
    }
    let decel = sc.planner.a_max;
    let reference = match sc.mission.kind {
        MissionKind::Navigate if start_vel == Vec3::zeros() => Reference::Hold(start),
        MissionKind::Navigate => Reference::Stop {
            p: start,
            v: start_vel,
            t0: 0.0,
            decel,
        },
        MissionKind::StraightLine => Reference::Line {
            profile: LineProfile::new(start, goal, sc.mission.cruise_speed, sc.mission.ramp_accel),
            t0: 0.0,
        },
    };
    let mut run = Runner {
        sc,
        map,
        reference,
        plan_id: 0,
        events: Vec::new(),
        unknown,
        decel,
    };
    let e = run.event(0.0, EventKind::MissionStart);
    run.events.push(e);

    let mut state = RobotState {
        position: start,
        velocity: start_vel,
        orientation: Rotation::from_yaw(sc.start.yaw),
        time: 0.0,
    };
    let mut est = state;
    let mut rng = noise_rng(sc.noise_seed());
    let mut cmd = Command {
        thrust: sc.vehicle.mass * crate::control::GRAVITY,
        orientation: state.orientation,
    };
    let mut yaw_ref = sc.start.yaw;
    let mut records = Vec::new();
    let max_ticks = (sc.mission.timeout / dt).ceil() as u64;
    let outcome;
    let mut k: u64 = 0;
    loop {
        let t = k as f64 * dt;
        state.time = t;
        if navigate && k % n_scan == 0 {
            run.scan(&state, t);
        }
        if navigate && k % n_plan == 0 {
            run.replan(t, &est);
        }
        if k % n_ctrl == 0 {
            est = estimate(&state, &sc.noise, &mut rng);
            let r = run.reference.sample(t);
            if sc.mission.yaw_mode == YawMode::Velocity {
                let h = r.velocity.xy();
                if h.norm() > 0.5 {
                    yaw_ref = h.y.atan2(h.x);
                }
            }
            let flat = FlatReference {
                position: r.position,
                velocity: r.velocity,
                acceleration: r.acceleration,
                jerk: r.jerk,
                yaw: yaw_ref,
            };
            // a degenerate force keeps the previous command
            if let Ok(c) = control_step(&est, &flat, &sc.control) {
                cmd = c;
            }
            records.push(record(t, &state, &est, &r, &cmd, run.plan_id));
            if navigate {
                if (state.position - goal).norm() <= sc.goal.tolerance && state.velocity.norm() < sc.mission.goal_speed {
                    outcome = MissionOutcome::Reached;
                    break;
                }
            } else if t >= run.reference.rest_time() + sc.mission.settle_time {
                outcome = if (state.position - goal).norm() <= sc.goal.tolerance {
                    MissionOutcome::Reached
                } else {
                    MissionOutcome::Completed
                };
                break;
            }
        }
        if k >= max_ticks {
            outcome = MissionOutcome::Timeout;
            break;
        }
        let prev = state.position;
        state = dynamics_step(&state, &cmd, dt, &sc.vehicle);
        let p = state.position;
        if sc.world.clearance(&p) < sc.robot_radius || !sc.world.is_free(&p) || sc.world.segment_blocked(&prev, &p) {
            state.time = (k + 1) as f64 * dt;
            let r = run.reference.sample(state.time);
            records.push(record(state.time, &state, &est, &r, &cmd, run.plan_id));
            let mut e = run.event(state.time, EventKind::Collision);
            e.detail = format!("clearance {}", sc.world.clearance(&p));
            run.events.push(e);
            outcome = MissionOutcome::Collision;
            break;
        }
        k += 1;
    }
    let t_end = records.last().map_or(0.0, |r| r.t);
    let kind = match outcome {
        MissionOutcome::Reached => EventKind::GoalReached,
        MissionOutcome::Completed => EventKind::Completed,
        MissionOutcome::Timeout => EventKind::Timeout,
        MissionOutcome::Collision => EventKind::Collision,
    };
    if outcome != MissionOutcome::Collision {
        let e = run.event(t_end, kind);
        run.events.push(e);
    }
    Ok(MissionLog {
        name: sc.name.clone(),
        goal,
        records,
        events: run.events,
        outcome,
    })
}
