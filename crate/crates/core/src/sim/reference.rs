//! Time-parameterised position references followed by the controller.

use crate::planner::PrimitiveTrajectory;
use crate::poly::PolyTrajectory;
use crate::state::Vec3;

/// Position and derivatives of a reference at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RefSample {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub jerk: Vec3,
}

/// Straight-line deceleration to rest at `decel` from `(p, v)`.
pub fn stop_sample(p: &Vec3, v: &Vec3, decel: f64, t: f64) -> RefSample {
    let speed = v.norm();
    if speed == 0.0 || decel <= 0.0 {
        return RefSample {
            position: *p,
            ..Default::default()
        };
    }
    let dir = v / speed;
    let t_stop = speed / decel;
    let t = t.clamp(0.0, t_stop);
    let s = speed * t - 0.5 * decel * t * t;
    let moving = t < t_stop;
    RefSample {
        position: p + dir * s,
        velocity: dir * (speed - decel * t),
        acceleration: if moving { -dir * decel } else { Vec3::zeros() },
        jerk: Vec3::zeros(),
    }
}

/// Trapezoidal (or triangular) speed profile along a straight line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineProfile {
    pub start: Vec3,
    pub dir: Vec3,
    pub length: f64,
    pub cruise: f64,
    pub accel: f64,
}

impl LineProfile {
    pub fn new(start: Vec3, goal: Vec3, cruise: f64, accel: f64) -> Self {
        let d = goal - start;
        let length = d.norm();
        let dir = if length > 0.0 { d / length } else { Vec3::x() };
        // triangular when the cruise speed cannot be reached
        let cruise = cruise.min((accel * length).sqrt());
        Self {
            start,
            dir,
            length,
            cruise,
            accel,
        }
    }

    pub fn ramp_time(&self) -> f64 {
        self.cruise / self.accel
    }

    pub fn duration(&self) -> f64 {
        if self.cruise == 0.0 {
            return 0.0;
        }
        2.0 * self.ramp_time() + (self.length - self.cruise * self.ramp_time()) / self.cruise
    }

    /// Start and end of the constant-speed phase.
    pub fn cruise_window(&self) -> (f64, f64) {
        (self.ramp_time(), self.duration() - self.ramp_time())
    }

    pub fn sample(&self, t: f64) -> RefSample {
        let (t1, t2) = self.cruise_window();
        let total = self.duration();
        let (s, v, a) = if t <= 0.0 {
            (0.0, 0.0, 0.0)
        } else if t < t1 {
            (0.5 * self.accel * t * t, self.accel * t, self.accel)
        } else if t < t2 {
            (0.5 * self.accel * t1 * t1 + self.cruise * (t - t1), self.cruise, 0.0)
        } else if t < total {
            let r = total - t;
            (self.length - 0.5 * self.accel * r * r, self.accel * r, -self.accel)
        } else {
            (self.length, 0.0, 0.0)
        };
        RefSample {
            position: self.start + self.dir * s,
            velocity: self.dir * v,
            acceleration: self.dir * a,
            jerk: Vec3::zeros(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Reference {
    Hold(Vec3),
    Poly { traj: PolyTrajectory, t0: f64, decel: f64 },
    Primitive { traj: PrimitiveTrajectory, t0: f64, decel: f64 },
    Stop { p: Vec3, v: Vec3, t0: f64, decel: f64 },
    Line { profile: LineProfile, t0: f64 },
}

impl Reference {
    /// Sample at absolute time `t`. Trajectories continue past their end as a
    /// straight-line stop at `decel`.
    pub fn sample(&self, t: f64) -> RefSample {
        match self {
            Self::Hold(p) => RefSample {
                position: *p,
                ..Default::default()
            },
            Self::Poly { traj, t0, decel } => {
                let local = t - t0;
                let d = traj.duration();
                if local <= d {
                    let local = local.max(0.0);
                    let e = |k| traj.eval(local, k).unwrap_or_else(|_| Vec3::zeros());
                    RefSample {
                        position: e(0),
                        velocity: e(1),
                        acceleration: e(2),
                        jerk: e(3),
                    }
                } else {
                    let p = traj.eval(d, 0).unwrap_or_else(|_| Vec3::zeros());
                    let v = traj.eval(d, 1).unwrap_or_else(|_| Vec3::zeros());
                    stop_sample(&p, &v, *decel, local - d)
                }
            }
            Self::Primitive { traj, t0, decel } => {
                let local = t - t0;
                if local <= traj.duration {
                    let (p, v, a) = traj.sample(local.max(0.0));
                    RefSample {
                        position: p,
                        velocity: v,
                        acceleration: a,
                        jerk: Vec3::zeros(),
                    }
                } else {
                    let (p, v) = traj.end_state().unwrap_or_default();
                    stop_sample(&p, &v, *decel, local - traj.duration)
                }
            }
            Self::Stop { p, v, t0, decel } => stop_sample(p, v, *decel, t - t0),
            Self::Line { profile, t0 } => profile.sample(t - t0),
        }
    }

    /// Time after which the reference is at rest.
    pub fn rest_time(&self) -> f64 {
        match self {
            Self::Hold(_) => f64::NEG_INFINITY,
            Self::Poly { traj, t0, decel } => {
                let v = traj.eval(traj.duration(), 1).map_or(0.0, |v| v.norm());
                t0 + traj.duration() + v / decel
            }
            Self::Primitive { traj, t0, decel } => {
                let v = traj.end_state().map_or(0.0, |(_, v)| v.norm());
                t0 + traj.duration + v / decel
            }
            Self::Stop { v, t0, decel, .. } => t0 + v.norm() / decel,
            Self::Line { profile, t0 } => t0 + profile.duration(),
        }
    }
}
