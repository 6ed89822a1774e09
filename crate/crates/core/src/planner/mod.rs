//! Motion-primitive graph search over position × velocity.
//!
//! Successors come from applying every element of a discretised acceleration
//! set for a fixed duration. A primitive survives only if its samples stay
//! clear of the inflated occupancy map and it respects the per-axis velocity
//! and acceleration limits. Edge cost is `(‖u‖² + ρ)·τ`.

pub mod heuristic;
pub mod oracle;
mod search;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::Vec3;
use crate::world::{UnknownPolicy, VoxelMap};

pub use heuristic::heuristic;
pub use search::{plan, plan_traced, PlanOutcome, StateKey};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("start state is in collision")]
    StartInCollision,
    #[error("goal unreachable: search space exhausted after {expansions} expansions")]
    GoalUnreachable { expansions: usize },
    #[error("expansion budget of {limit} exhausted before reaching the goal")]
    ExpansionLimit { limit: usize },
    #[error("invalid planner input: {0}")]
    Invalid(String),
}

impl PlanError {
    /// Both ways the search can fail to produce a path.
    pub fn is_no_path(&self) -> bool {
        matches!(self, Self::GoalUnreachable { .. } | Self::ExpansionLimit { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    /// per-axis speed limit, m/s
    pub v_max: f64,
    /// per-axis acceleration limit, m/s²
    pub a_max: f64,
    /// τ, s
    pub primitive_duration: f64,
    /// Per-axis acceleration levels; defaults to {−a, −a/2, 0, a/2, a}.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accel_levels: Option<Vec<f64>>,
    /// ρ; defaults to 10·a_max².
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_weight: Option<f64>,
    /// Collision sampling step; defaults to τ/10.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collision_step: Option<f64>,
    /// Duplicate-detection quantum for position; defaults to half the voxel size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position_quantum: Option<f64>,
    pub velocity_quantum: f64,
    /// Per-axis speed accepted at the goal; defaults to half the velocity
    /// lattice step so some lattice velocity always qualifies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub goal_speed_tolerance: Option<f64>,
    pub max_expansions: usize,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            v_max: 8.0,
            a_max: 4.0,
            primitive_duration: 1.0,
            accel_levels: None,
            time_weight: None,
            collision_step: None,
            position_quantum: None,
            velocity_quantum: 0.1,
            goal_speed_tolerance: None,
            max_expansions: 200_000,
        }
    }
}

impl PlannerParams {
    pub fn rho(&self) -> f64 {
        self.time_weight.unwrap_or(10.0 * self.a_max * self.a_max)
    }

    pub fn levels(&self) -> Vec<f64> {
        match &self.accel_levels {
            Some(l) => l.clone(),
            None => {
                let a = self.a_max;
                vec![-a, -0.5 * a, 0.0, 0.5 * a, a]
            }
        }
    }

    pub fn collision_dt(&self) -> f64 {
        self.collision_step.unwrap_or(self.primitive_duration / 10.0)
    }

    pub fn goal_speed_tol(&self) -> f64 {
        self.goal_speed_tolerance.unwrap_or_else(|| {
            let step = self
                .levels()
                .iter()
                .map(|u| u.abs())
                .filter(|u| *u > 0.0)
                .fold(f64::INFINITY, f64::min);
            if step.is_finite() {
                0.5 * step * self.primitive_duration
            } else {
                0.0
            }
        })
    }

    /// Upper bound on the distance between consecutive collision samples.
    /// Inflating the checked radius by half of it keeps every intermediate
    /// point clear at the original radius.
    pub fn sampling_gap(&self) -> f64 {
        3f64.sqrt() * self.v_max * self.collision_dt()
    }

    /// Cross product of the per-axis levels, x outermost.
    pub fn inputs(&self) -> Vec<Vec3> {
        let levels = self.levels();
        let mut out = Vec::with_capacity(levels.len().pow(3));
        for &ux in &levels {
            for &uy in &levels {
                for &uz in &levels {
                    out.push(Vec3::new(ux, uy, uz));
                }
            }
        }
        out
    }

    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut errs = Vec::new();
        let mut pos = |v: f64, name: &str| {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("{prefix}.{name}: must be positive"));
            }
        };
        pos(self.v_max, "v_max");
        pos(self.a_max, "a_max");
        pos(self.primitive_duration, "primitive_duration");
        pos(self.velocity_quantum, "velocity_quantum");
        if let Some(r) = self.time_weight {
            pos(r, "time_weight");
        }
        if let Some(s) = self.collision_step {
            pos(s, "collision_step");
        }
        if let Some(q) = self.position_quantum {
            pos(q, "position_quantum");
        }
        if let Some(levels) = &self.accel_levels {
            if levels.is_empty() {
                errs.push(format!("{prefix}.accel_levels: must not be empty"));
            }
            if !levels.contains(&0.0) {
                errs.push(format!("{prefix}.accel_levels: must include 0"));
            }
            if levels.iter().any(|u| u.abs() > self.a_max) {
                errs.push(format!("{prefix}.accel_levels: magnitudes must not exceed a_max"));
            }
            let mut sorted: Vec<f64> = levels.clone();
            sorted.sort_by(f64::total_cmp);
            let mut mirrored: Vec<f64> = levels.iter().map(|u| -u).collect();
            mirrored.sort_by(f64::total_cmp);
            if sorted != mirrored {
                errs.push(format!("{prefix}.accel_levels: must be symmetric about 0"));
            }
        }
        if let Some(t) = self.goal_speed_tolerance {
            if !(t >= 0.0) {
                errs.push(format!("{prefix}.goal_speed_tolerance: must be non-negative"));
            }
        }
        if self.max_expansions == 0 {
            errs.push(format!("{prefix}.max_expansions: must be positive"));
        }
        errs
    }
}

/// Closed-form double-integrator propagation under constant input.
pub fn propagate(pos: &Vec3, vel: &Vec3, u: &Vec3, tau: f64) -> (Vec3, Vec3) {
    (pos + vel * tau + u * (0.5 * tau * tau), vel + u * tau)
}

/// Constant-acceleration segment of fixed duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub start_position: Vec3,
    pub start_velocity: Vec3,
    pub input: Vec3,
    pub duration: f64,
}

impl Primitive {
    pub fn end(&self) -> (Vec3, Vec3) {
        propagate(&self.start_position, &self.start_velocity, &self.input, self.duration)
    }

    pub fn position_at(&self, t: f64) -> Vec3 {
        propagate(&self.start_position, &self.start_velocity, &self.input, t).0
    }

    pub fn velocity_at(&self, t: f64) -> Vec3 {
        self.start_velocity + self.input * t
    }

    pub fn cost(&self, rho: f64) -> f64 {
        (self.input.norm_squared() + rho) * self.duration
    }
}

/// Chain of primitives returned by the search.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrimitiveTrajectory {
    pub primitives: Vec<Primitive>,
    pub cost: f64,
    pub duration: f64,
}

impl PrimitiveTrajectory {
    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    /// Position, velocity and acceleration at `t` from the start. At a joint the
    /// later primitive is used; past the end the final state is held with zero
    /// input.
    pub fn sample(&self, t: f64) -> (Vec3, Vec3, Vec3) {
        let mut start = 0.0;
        for (k, p) in self.primitives.iter().enumerate() {
            let last = k + 1 == self.primitives.len();
            if t < start + p.duration || last && t <= start + p.duration {
                let local = (t - start).max(0.0);
                return (p.position_at(local), p.velocity_at(local), p.input);
            }
            start += p.duration;
        }
        match self.primitives.last() {
            Some(p) => {
                let (pos, vel) = p.end();
                (pos, vel, Vec3::zeros())
            }
            None => (Vec3::zeros(), Vec3::zeros(), Vec3::zeros()),
        }
    }

    pub fn start_state(&self) -> Option<(Vec3, Vec3)> {
        self.primitives.first().map(|p| (p.start_position, p.start_velocity))
    }

    pub fn end_state(&self) -> Option<(Vec3, Vec3)> {
        self.primitives.last().map(Primitive::end)
    }
}

/// Inflated-occupancy view of a map used for planning queries. The map
/// extent acts as a fence: the robot ball must stay inside it.
#[derive(Debug, Clone, Copy)]
pub struct CollisionQuery<'a> {
    pub map: &'a VoxelMap,
    pub robot_radius: f64,
    pub unknown: UnknownPolicy,
    lo: Vec3,
    hi: Vec3,
}

impl<'a> CollisionQuery<'a> {
    pub fn new(map: &'a VoxelMap, robot_radius: f64, unknown: UnknownPolicy) -> Self {
        let extent = map.dims().map(|d| d as f64);
        let lo = map.origin();
        let hi = lo + Vec3::from(extent) * map.resolution();
        Self {
            map,
            robot_radius,
            unknown,
            lo,
            hi,
        }
    }

    pub fn blocked(&self, p: &Vec3) -> bool {
        let r = self.robot_radius;
        (0..3).any(|i| p[i] - r < self.lo[i] || p[i] + r > self.hi[i])
            || self.map.is_occupied_inflated(p, r, self.unknown)
    }
}

const LIMIT_SLACK: f64 = 1e-9;

/// Sample times `0, Δt, 2Δt, …, τ` (the end point always included).
pub fn sample_times(duration: f64, dt: f64) -> impl Iterator<Item = f64> {
    let n = ((duration / dt) - 1e-9).ceil().max(1.0) as usize;
    (0..=n).map(move |k| if k == n { duration } else { k as f64 * dt })
}

/// Limit and collision check of one primitive.
pub fn check_primitive(prim: &Primitive, query: &CollisionQuery<'_>, params: &PlannerParams) -> bool {
    if (0..3).any(|i| prim.input[i].abs() > params.a_max + LIMIT_SLACK) {
        return false;
    }
    let (_, end_vel) = prim.end();
    // velocity is affine in time, so the endpoints bound every axis
    if (0..3).any(|i| {
        prim.start_velocity[i].abs() > params.v_max + LIMIT_SLACK
            || end_vel[i].abs() > params.v_max + LIMIT_SLACK
    }) {
        return false;
    }
    // the end point rejects most candidates, so test it first
    if query.blocked(&prim.end().0) {
        return false;
    }
    sample_times(prim.duration, params.collision_dt()).all(|t| !query.blocked(&prim.position_at(t)))
}

/// Every surviving primitive from `(pos, vel)` paired with its edge cost, in
/// input order.
pub fn successors(
    pos: &Vec3,
    vel: &Vec3,
    params: &PlannerParams,
    query: &CollisionQuery<'_>,
) -> Vec<(Primitive, f64)> {
    successors_from(pos, vel, &params.inputs(), params, query)
}

/// [`successors`] with a precomputed input list.
pub fn successors_from(
    pos: &Vec3,
    vel: &Vec3,
    inputs: &[Vec3],
    params: &PlannerParams,
    query: &CollisionQuery<'_>,
) -> Vec<(Primitive, f64)> {
    let rho = params.rho();
    inputs
        .iter()
        .copied()
        .filter_map(|u| {
            let prim = Primitive {
                start_position: *pos,
                start_velocity: *vel,
                input: u,
                duration: params.primitive_duration,
            };
            check_primitive(&prim, query, params).then(|| (prim, prim.cost(rho)))
        })
        .collect()
}
