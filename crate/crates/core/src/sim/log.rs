//! Mission time series, planner events and their CSV form.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::state::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct ControlRecord {
    pub t: f64,
    pub true_pos: Vec3,
    pub true_vel: Vec3,
    pub est_pos: Vec3,
    pub est_vel: Vec3,
    pub ref_pos: Vec3,
    pub ref_vel: Vec3,
    pub ref_acc: Vec3,
    pub thrust: f64,
    pub tilt_deg: f64,
    pub tracking_error: f64,
    pub plan_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    MissionStart,
    Plan,
    PlanEmpty,
    PlanFailed,
    RefineFallback,
    EmergencyStop,
    GoalReached,
    Collision,
    Timeout,
    Completed,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::MissionStart => "mission_start",
            Self::Plan => "plan",
            Self::PlanEmpty => "plan_empty",
            Self::PlanFailed => "plan_failed",
            Self::RefineFallback => "refine_fallback",
            Self::EmergencyStop => "emergency_stop",
            Self::GoalReached => "goal_reached",
            Self::Collision => "collision",
            Self::Timeout => "timeout",
            Self::Completed => "completed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Self::MissionStart,
            Self::Plan,
            Self::PlanEmpty,
            Self::PlanFailed,
            Self::RefineFallback,
            Self::EmergencyStop,
            Self::GoalReached,
            Self::Collision,
            Self::Timeout,
            Self::Completed,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanEvent {
    pub t: f64,
    pub plan_id: u32,
    pub kind: EventKind,
    pub cost: f64,
    pub expansions: usize,
    /// duration of the new reference, s
    pub duration: f64,
    /// reference jumps across a trajectory swap
    pub swap_pos_jump: f64,
    pub swap_vel_jump: f64,
    /// refined vs primitive trajectory, m
    pub deviation: f64,
    pub occupied_voxels: usize,
    pub detail: String,
}

impl PlanEvent {
    pub fn new(t: f64, plan_id: u32, kind: EventKind) -> Self {
        Self {
            t,
            plan_id,
            kind,
            cost: f64::NAN,
            expansions: 0,
            duration: f64::NAN,
            swap_pos_jump: f64::NAN,
            swap_vel_jump: f64::NAN,
            deviation: f64::NAN,
            occupied_voxels: 0,
            detail: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissionOutcome {
    Reached,
    Completed,
    Collision,
    Timeout,
}

impl MissionOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Reached => "reached",
            Self::Completed => "completed",
            Self::Collision => "collision",
            Self::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionLog {
    pub name: String,
    pub goal: Vec3,
    pub records: Vec<ControlRecord>,
    pub events: Vec<PlanEvent>,
    pub outcome: MissionOutcome,
}

pub const CONTROL_HEADER: &str = "t,true_x,true_y,true_z,true_vx,true_vy,true_vz,est_x,est_y,est_z,est_vx,est_vy,est_vz,\
ref_x,ref_y,ref_z,ref_vx,ref_vy,ref_vz,ref_ax,ref_ay,ref_az,thrust,tilt_deg,tracking_error,plan_id";

pub const EVENT_HEADER: &str =
    "t,plan_id,event,cost,expansions,duration,swap_pos_jump,swap_vel_jump,deviation,occupied_voxels,detail";

fn push_vec(line: &mut String, v: &Vec3) {
    for c in v.iter() {
        let _ = write!(line, ",{c}");
    }
}

impl MissionLog {
    pub fn write_control_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{CONTROL_HEADER}")?;
        let mut line = String::with_capacity(512);
        for r in &self.records {
            line.clear();
            let _ = write!(line, "{}", r.t);
            for v in [&r.true_pos, &r.true_vel, &r.est_pos, &r.est_vel, &r.ref_pos, &r.ref_vel, &r.ref_acc] {
                push_vec(&mut line, v);
            }
            let _ = write!(line, ",{},{},{},{}", r.thrust, r.tilt_deg, r.tracking_error, r.plan_id);
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn write_events_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{EVENT_HEADER}")?;
        for e in &self.events {
            // detail is free text; keep it a single CSV field
            let detail = e.detail.replace([',', '\n'], ";");
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                e.t,
                e.plan_id,
                e.kind.as_str(),
                e.cost,
                e.expansions,
                e.duration,
                e.swap_pos_jump,
                e.swap_vel_jump,
                e.deviation,
                e.occupied_voxels,
                detail
            )?;
        }
        Ok(())
    }

    pub fn summary(&self) -> MissionSummary {
        MissionSummary::from_parts(&self.name, &self.goal, &self.records, &self.events, self.outcome)
    }
}

/// Aggregate metrics; everything here is recomputable from the two CSV files.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionSummary {
    pub name: String,
    pub outcome: MissionOutcome,
    pub final_time: f64,
    pub final_goal_distance: f64,
    pub max_speed: f64,
    pub max_tracking_error: f64,
    pub path_length: f64,
    pub plans: usize,
    pub plan_failures: usize,
    pub emergency_stops: usize,
    pub refine_fallbacks: usize,
    pub max_swap_pos_jump: f64,
    pub max_swap_vel_jump: f64,
    /// largest refined-vs-primitive deviation over all plans, m
    pub max_deviation: f64,
}

impl MissionSummary {
    pub fn from_parts(
        name: &str,
        goal: &Vec3,
        records: &[ControlRecord],
        events: &[PlanEvent],
        outcome: MissionOutcome,
    ) -> Self {
        let count = |k: EventKind| events.iter().filter(|e| e.kind == k).count();
        let fmax = |it: &mut dyn Iterator<Item = f64>| it.filter(|v| v.is_finite()).fold(0.0, f64::max);
        let last = records.last();
        Self {
            name: name.to_string(),
            outcome,
            final_time: last.map_or(0.0, |r| r.t),
            final_goal_distance: last.map_or(f64::NAN, |r| (r.true_pos - goal).norm()),
            max_speed: fmax(&mut records.iter().map(|r| r.true_vel.norm())),
            max_tracking_error: fmax(&mut records.iter().map(|r| r.tracking_error)),
            path_length: records.windows(2).map(|w| (w[1].true_pos - w[0].true_pos).norm()).sum(),
            plans: count(EventKind::Plan),
            plan_failures: count(EventKind::PlanFailed),
            emergency_stops: count(EventKind::EmergencyStop),
            refine_fallbacks: count(EventKind::RefineFallback),
            max_swap_pos_jump: fmax(&mut events.iter().map(|e| e.swap_pos_jump)),
            max_swap_vel_jump: fmax(&mut events.iter().map(|e| e.swap_vel_jump)),
            max_deviation: fmax(&mut events.iter().map(|e| e.deviation)),
        }
    }

    /// Numeric field by name, as used in expected-metric files.
    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "final_time" => self.final_time,
            "final_goal_distance" => self.final_goal_distance,
            "max_speed" => self.max_speed,
            "max_tracking_error" => self.max_tracking_error,
            "path_length" => self.path_length,
            "plans" => self.plans as f64,
            "plan_failures" => self.plan_failures as f64,
            "emergency_stops" => self.emergency_stops as f64,
            "refine_fallbacks" => self.refine_fallbacks as f64,
            "max_swap_pos_jump" => self.max_swap_pos_jump,
            "max_swap_vel_jump" => self.max_swap_vel_jump,
            "max_deviation" => self.max_deviation,
            _ => return None,
        })
    }

    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        format!(
            "name = \"{}\"\noutcome = \"{}\"\nfinal_time = {}\nfinal_goal_distance = {}\nmax_speed = {}\n\
max_tracking_error = {}\npath_length = {}\nplans = {}\nplan_failures = {}\nemergency_stops = {}\n\
refine_fallbacks = {}\nmax_swap_pos_jump = {}\nmax_swap_vel_jump = {}\nmax_deviation = {}\n",
            self.name,
            self.outcome.as_str(),
            self.final_time,
            self.final_goal_distance,
            self.max_speed,
            self.max_tracking_error,
            self.path_length,
            self.plans,
            self.plan_failures,
            self.emergency_stops,
            self.refine_fallbacks,
            self.max_swap_pos_jump,
            self.max_swap_vel_jump,
            self.max_deviation
        )
    }
}

/// Parses a control CSV written by [`MissionLog::write_control_csv`].
pub fn read_control_csv(text: &str) -> Result<Vec<ControlRecord>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CONTROL_HEADER => {}
        _ => return Err("unexpected control CSV header".into()),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 26 {
                return Err(format!("line {}: expected 26 fields, got {}", i + 2, f.len()));
            }
            let num = |k: usize| f[k].parse::<f64>().map_err(|e| format!("line {} field {k}: {e}", i + 2));
            let vec = |k: usize| -> Result<Vec3, String> { Ok(Vec3::new(num(k)?, num(k + 1)?, num(k + 2)?)) };
            Ok(ControlRecord {
                t: num(0)?,
                true_pos: vec(1)?,
                true_vel: vec(4)?,
                est_pos: vec(7)?,
                est_vel: vec(10)?,
                ref_pos: vec(13)?,
                ref_vel: vec(16)?,
                ref_acc: vec(19)?,
                thrust: num(22)?,
                tilt_deg: num(23)?,
                tracking_error: num(24)?,
                plan_id: f[25].parse().map_err(|e| format!("line {}: {e}", i + 2))?,
            })
        })
        .collect()
}

/// Parses an events CSV written by [`MissionLog::write_events_csv`].
pub fn read_events_csv(text: &str) -> Result<Vec<PlanEvent>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == EVENT_HEADER => {}
        _ => return Err("unexpected events CSV header".into()),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.splitn(11, ',').collect();
            if f.len() != 11 {
                return Err(format!("line {}: expected 11 fields", i + 2));
            }
            let num = |k: usize| f[k].parse::<f64>().map_err(|e| format!("line {} field {k}: {e}", i + 2));
            let int = |k: usize| f[k].parse::<usize>().map_err(|e| format!("line {} field {k}: {e}", i + 2));
            Ok(PlanEvent {
                t: num(0)?,
                plan_id: int(1)? as u32,
                kind: EventKind::parse(f[2]).ok_or_else(|| format!("line {}: unknown event {}", i + 2, f[2]))?,
                cost: num(3)?,
                expansions: int(4)?,
                duration: num(5)?,
                swap_pos_jump: num(6)?,
                swap_vel_jump: num(7)?,
                deviation: num(8)?,
                occupied_voxels: int(9)?,
                detail: f[10].to_string(),
            })
        })
        .collect()
}
