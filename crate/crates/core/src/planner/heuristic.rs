//! Per-axis minimum-time bounds for a velocity- and acceleration-limited
//! double integrator. The search heuristic is the time weight times the
//! largest per-axis bound.

use crate::planner::PlannerParams;
use crate::state::Vec3;

/// Minimum time to first reach distance `dist >= 0` ahead, starting with
/// velocity `v` (positive toward the target), final velocity free.
pub fn time_to_reach(dist: f64, v: f64, a_max: f64, v_max: f64) -> f64 {
    if dist <= 0.0 {
        return 0.0;
    }
    let v = v.clamp(-v_max, v_max);
    let t_cap = (v_max - v) / a_max;
    let x_cap = (v_max * v_max - v * v) / (2.0 * a_max);
    if dist <= x_cap {
        (-v + (v * v + 2.0 * a_max * dist).sqrt()) / a_max
    } else {
        t_cap + (dist - x_cap) / v_max
    }
}

/// Minimum time to come to rest at signed offset `target`, starting at the
/// origin with velocity `v`.
pub fn time_to_rest_at(target: f64, v: f64, a_max: f64, v_max: f64) -> f64 {
    let v = v.clamp(-v_max, v_max);
    let stop = v * v.abs() / (2.0 * a_max);
    // mirror so the target lies at or beyond the natural stopping point
    let (x, v) = if target >= stop { (target, v) } else { (-target, -v) };
    let peak2 = a_max * x + 0.5 * v * v;
    let peak = peak2.max(0.0).sqrt();
    if peak <= v_max {
        (2.0 * peak - v) / a_max
    } else {
        let accel = (v_max * v_max - v * v) / (2.0 * a_max);
        let decel = v_max * v_max / (2.0 * a_max);
        (v_max - v) / a_max + v_max / a_max + (x - accel - decel) / v_max
    }
}

/// Lower bound on the time for one axis to enter `[offset - pos_tol, offset + pos_tol]`
/// with speed at most `vel_tol` there.
pub fn axis_time_bound(offset: f64, v: f64, pos_tol: f64, vel_tol: f64, a_max: f64, v_max: f64) -> f64 {
    // reach the interval at all
    let reach = if offset.abs() <= pos_tol {
        0.0
    } else {
        let toward = v * offset.signum();
        time_to_reach(offset.abs() - pos_tol, toward, a_max, v_max)
    };
    // shed enough speed
    let shed = (v.abs() - vel_tol).max(0.0) / a_max;
    // stopping from the goal condition takes at most vel_tol / a_max and
    // vel_tol² / (2 a_max) of travel, so resting inside the widened interval
    // costs at most that much extra time
    let widen = pos_tol + vel_tol * vel_tol / (2.0 * a_max);
    let stop = v * v.abs() / (2.0 * a_max);
    let rest_target = stop.clamp(offset - widen, offset + widen);
    let rest = time_to_rest_at(rest_target, v, a_max, v_max) - vel_tol / a_max;
    reach.max(shed).max(rest).max(0.0)
}

/// Lower bound on the remaining time for all three axes.
pub fn time_bound(pos: &Vec3, vel: &Vec3, goal: &Vec3, pos_tol: f64, vel_tol: f64, params: &PlannerParams) -> f64 {
    (0..3)
        .map(|i| {
            axis_time_bound(
                goal[i] - pos[i],
                vel[i],
                pos_tol,
                vel_tol,
                params.a_max,
                params.v_max,
            )
        })
        .fold(0.0, f64::max)
}

/// Time weight times the per-axis minimum time to come to rest exactly at `goal`.
pub fn heuristic(pos: &Vec3, vel: &Vec3, goal: &Vec3, params: &PlannerParams) -> f64 {
    params.rho() * time_bound(pos, vel, goal, 0.0, 0.0, params)
}

/// Heuristic used by the search: relaxed to the goal tolerances and shaved by
/// a relative 1e-12 so rounding can never make it exceed the true cost.
pub fn search_heuristic(pos: &Vec3, vel: &Vec3, goal: &Vec3, pos_tol: f64, vel_tol: f64, params: &PlannerParams) -> f64 {
    params.rho() * time_bound(pos, vel, goal, pos_tol, vel_tol, params) * (1.0 - 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Brute force: bang-coast-bang forward simulation with a fine step, trying
    /// every switching time on a grid. Returns the earliest time the goal
    /// condition holds.
    fn brute_force(offset: f64, v0: f64, pos_tol: f64, vel_tol: f64, a: f64, vmax: f64) -> f64 {
        let dt = 5e-3;
        let horizon = 15.0;
        let steps = (horizon / dt) as usize;
        let mut best = f64::INFINITY;
        // policy: accelerate with sign s1 for k1 steps (speed-limited), then
        // brake with the opposite sign; covers the time-optimal families
        for s1 in [-1.0, 1.0] {
            for k1 in (0..steps).step_by(4) {
                let (mut x, mut v) = (0.0f64, v0);
                for k in 0..steps {
                    let t = k as f64 * dt;
                    if (x - offset).abs() <= pos_tol && v.abs() <= vel_tol {
                        best = best.min(t);
                        break;
                    }
                    if t >= best {
                        break;
                    }
                    let u = if k < k1 { s1 * a } else { -v.signum() * a };
                    let u = if k >= k1 && v.abs() < a * dt { -v / dt } else { u };
                    let vn = (v + u * dt).clamp(-vmax, vmax);
                    x += 0.5 * (v + vn) * dt;
                    v = vn;
                }
            }
        }
        best
    }

    #[test]
    fn rest_to_rest_example() {
        assert_relative_eq!(time_to_rest_at(10.0, 0.0, 2.5, 5.0), 4.0, epsilon = 1e-12);
        let p = PlannerParams {
            a_max: 2.5,
            v_max: 5.0,
            ..PlannerParams::default()
        };
        let h = heuristic(&Vec3::zeros(), &Vec3::zeros(), &Vec3::new(10.0, 0.0, 0.0), &p);
        assert_relative_eq!(h, 4.0 * p.rho(), epsilon = 1e-9);
        assert_eq!(heuristic(&Vec3::new(1.0, 2.0, 3.0), &Vec3::zeros(), &Vec3::new(1.0, 2.0, 3.0), &p), 0.0);
    }

    #[test]
    fn cruise_segment_included() {
        // 30 m at rest, a = 2.5, v = 5: 2 s up, 2 s down, 10 m in 4 s, 20 m cruise
        assert_relative_eq!(time_to_rest_at(30.0, 0.0, 2.5, 5.0), 8.0, epsilon = 1e-12);
        assert_relative_eq!(time_to_reach(30.0, 0.0, 2.5, 5.0), 2.0 + 25.0 / 5.0, epsilon = 1e-12);
    }

    #[test]
    fn overshoot_when_too_fast() {
        // moving at 4 toward a target 1 m ahead with a = 2: stop at 4 m, return 3 m
        let t = time_to_rest_at(1.0, 4.0, 2.0, 10.0);
        let back = 2.0 * (3.0f64 / 2.0).sqrt();
        assert_relative_eq!(t, 2.0 + back, epsilon = 1e-12);
    }

    #[test]
    fn closed_forms_match_brute_force() {
        let cases = [
            (10.0, 0.0, 0.0, 0.0),
            (6.0, 2.0, 0.0, 0.0),
            (-5.0, 3.0, 0.0, 0.0),
            (4.0, -2.0, 0.5, 0.5),
            (12.0, 1.0, 1.0, 1.0),
            (0.5, 3.5, 1.0, 1.0),
        ];
        for (off, v0, pt, vt) in cases {
            let lb = axis_time_bound(off, v0, pt, vt, 2.0, 4.0);
            if pt == 0.0 && vt == 0.0 {
                // exact in the point-to-rest case; the simulation needs a sliver of tolerance
                let bf = brute_force(off, v0, 0.1, 0.1, 2.0, 4.0);
                assert!((lb - bf).abs() < 0.2, "bound {lb} vs brute force {bf}");
            } else {
                let bf = brute_force(off, v0, pt, vt, 2.0, 4.0);
                assert!(lb <= bf + 1e-2, "bound {lb} exceeds achievable {bf} for {off} {v0}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn bound_never_exceeds_achievable_time(
            off in -15.0f64..15.0,
            v0 in -4.0f64..4.0,
            pt in 0.0f64..1.5,
            vt in 0.0f64..1.5,
        ) {
            let lb = axis_time_bound(off, v0, pt, vt, 2.0, 4.0);
            let bf = brute_force(off, v0, pt, vt, 2.0, 4.0);
            prop_assert!(lb <= bf + 1e-2, "bound {} > brute force {}", lb, bf);
        }
    }
}
