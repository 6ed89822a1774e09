//! Metrics computed from mission logs alone.

use crate::control::ControlParams;
use crate::scenario::Scenario;
use crate::sim::{ControlRecord, LineProfile};
use crate::state::Vec3;
use crate::world::Aabb;

/// Line profile a straight-line scenario commands.
pub fn line_profile(sc: &Scenario) -> LineProfile {
    LineProfile::new(
        sc.start_position(),
        sc.goal_position(),
        sc.mission.cruise_speed,
        sc.mission.ramp_accel,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineStats {
    /// mean along-track distance of the robot behind the reference, m
    pub lag: f64,
    /// mean along-track speed, m/s
    pub cruise_speed: f64,
    /// largest |z − z_ref| over the whole run, m
    pub max_altitude_error: f64,
}

/// Statistics over the second half of the cruise window, where the
/// transient from the ramp has decayed.
pub fn line_stats(records: &[ControlRecord], profile: &LineProfile) -> LineStats {
    let (t1, t2) = profile.cruise_window();
    let from = 0.5 * (t1 + t2);
    let window: Vec<&ControlRecord> = records.iter().filter(|r| r.t >= from && r.t <= t2).collect();
    let n = window.len().max(1) as f64;
    let lag = window.iter().map(|r| (r.ref_pos - r.true_pos).dot(&profile.dir)).sum::<f64>() / n;
    let speed = window.iter().map(|r| r.true_vel.dot(&profile.dir)).sum::<f64>() / n;
    let alt = records.iter().map(|r| (r.true_pos.z - r.ref_pos.z).abs()).fold(0.0, f64::max);
    LineStats {
        lag,
        cruise_speed: speed,
        max_altitude_error: alt,
    }
}

/// Steady-state lag of the uncompensated controller under linear drag.
pub fn predicted_lag(p: &ControlParams, speed: f64) -> f64 {
    p.k_d / p.mass * speed / p.k_x
}

/// Fastest level cruise the thrust limit allows with drag compensation:
/// `(k_d v)² + (m g)² = f_max²`, also capped by the tilt limit.
pub fn saturation_speed(p: &ControlParams, f_max: f64) -> f64 {
    let w = p.mass * p.gravity;
    if f_max <= w {
        return 0.0;
    }
    let thrust_bound = (f_max * f_max - w * w).sqrt() / p.k_d;
    let tilt_bound = w * p.max_tilt_deg.to_radians().tan() / p.k_d;
    thrust_bound.min(tilt_bound)
}

/// Altitudes at `step` intervals from the first time the reference exceeds
/// `speed` until the end of the cruise window.
pub fn altitude_trace(records: &[ControlRecord], profile: &LineProfile, speed: f64, step: f64) -> Vec<(f64, f64)> {
    let (_, t2) = profile.cruise_window();
    let Some(start) = records.iter().find(|r| r.ref_vel.norm() > speed).map(|r| r.t) else {
        return Vec::new();
    };
    let mut next = start;
    let mut out = Vec::new();
    for r in records.iter().filter(|r| r.t >= start && r.t <= t2) {
        if r.t + 1e-9 >= next {
            out.push((r.t, r.true_pos.z));
            next += step;
        }
    }
    out
}

pub fn strictly_decreasing(trace: &[(f64, f64)]) -> bool {
    trace.len() >= 2 && trace.windows(2).all(|w| w[1].1 < w[0].1)
}

/// Does the straight segment between consecutive logged positions ever pass
/// through `region`?
pub fn passes_through(records: &[ControlRecord], region: &Aabb) -> bool {
    const SUB: usize = 8;
    records.windows(2).any(|w| {
        (0..=SUB).any(|k| {
            let s = k as f64 / SUB as f64;
            region.contains(&(w[0].true_pos + s * (w[1].true_pos - w[0].true_pos)))
        })
    })
}

/// First logged time at which the robot is inside `region`.
pub fn first_entry(records: &[ControlRecord], region: &Aabb) -> Option<f64> {
    records.iter().find(|r| region.contains(&r.true_pos)).map(|r| r.t)
}

pub fn min_clearance(records: &[ControlRecord], clearance: impl Fn(&Vec3) -> f64) -> f64 {
    records.iter().map(|r| clearance(&r.true_pos)).fold(f64::INFINITY, f64::min)
}
