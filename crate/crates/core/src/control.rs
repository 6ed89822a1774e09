//! Geometric position controller with linear drag compensation.
//!
//! The desired force combines per-unit-mass PD feedback, the reference
//! acceleration and gravity; with compensation enabled the modelled drag
//! `k_d·v` is added. Its direction fixes the commanded body z axis, the
//! reference yaw fixes the heading, and the thrust is the force projected on
//! the current body z axis.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{rotation_from_z_and_yaw, FlatReference, GeometryError, RobotState, Rotation, Vec3};

pub const GRAVITY: f64 = 9.80665;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("desired force is zero or non-finite")]
    DegenerateForce,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlParams {
    /// s⁻²
    pub k_x: f64,
    /// s⁻¹
    pub k_v: f64,
    /// kg/s
    pub k_d: f64,
    /// kg
    pub mass: f64,
    pub gravity: f64,
    /// N
    pub f_max: f64,
    pub drag_comp: bool,
    /// Commanded tilt is limited to this many degrees.
    pub max_tilt_deg: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        let mass = 1.5;
        Self {
            k_x: 1.0,
            k_v: 1.8,
            k_d: 0.2 * mass,
            mass,
            gravity: GRAVITY,
            f_max: 2.0 * mass * GRAVITY,
            drag_comp: true,
            max_tilt_deg: 60.0,
        }
    }
}

impl ControlParams {
    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut errs = Vec::new();
        for (v, name) in [
            (self.k_x, "k_x"),
            (self.k_v, "k_v"),
            (self.mass, "mass"),
            (self.gravity, "gravity"),
            (self.f_max, "f_max"),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("{prefix}.{name}: must be positive"));
            }
        }
        if !(self.k_d >= 0.0 && self.k_d.is_finite()) {
            errs.push(format!("{prefix}.k_d: must be non-negative"));
        }
        if !(self.max_tilt_deg > 0.0 && self.max_tilt_deg < 89.0) {
            errs.push(format!("{prefix}.max_tilt_deg: must lie in (0, 89)"));
        }
        errs
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    /// N along body z
    pub thrust: f64,
    pub orientation: Rotation,
}

/// Body-planar drag `−k_d R P Rᵀ v` with `P = diag(1, 1, 0)`.
pub fn drag_force(r: &Rotation, v: &Vec3, k_d: f64) -> Vec3 {
    let mut body = r.transpose().rotate(v);
    body.z = 0.0;
    -k_d * r.rotate(&body)
}

pub fn desired_force(state: &RobotState, reference: &FlatReference, p: &ControlParams) -> Vec3 {
    let e_x = state.position - reference.position;
    let e_v = state.velocity - reference.velocity;
    let mut f = p.mass * (-p.k_x * e_x - p.k_v * e_v + reference.acceleration + Vec3::new(0.0, 0.0, p.gravity));
    if p.drag_comp {
        f += p.k_d * state.velocity;
    }
    f
}

/// Rotates `b3` toward world z so its tilt does not exceed `max_tilt`.
fn limit_tilt(b3: Vec3, max_tilt: f64) -> Vec3 {
    let tilt = b3.z.clamp(-1.0, 1.0).acos();
    if tilt <= max_tilt {
        return b3;
    }
    let horizontal = Vec3::new(b3.x, b3.y, 0.0);
    let h = horizontal.norm();
    if h < 1e-12 {
        // pointing straight down: no preferred direction, fall back to level
        return Vec3::z();
    }
    horizontal / h * max_tilt.sin() + Vec3::z() * max_tilt.cos()
}

pub fn control_step(state: &RobotState, reference: &FlatReference, p: &ControlParams) -> Result<Command, ControlError> {
    let f = desired_force(state, reference, p);
    let n = f.norm();
    if !(n > 1e-12 && n.is_finite()) {
        return Err(ControlError::DegenerateForce);
    }
    let b3 = limit_tilt(f / n, p.max_tilt_deg.to_radians());
    let orientation = rotation_from_z_and_yaw(b3, reference.yaw)?;
    let thrust = f.dot(&state.orientation.z_axis()).clamp(0.0, p.f_max);
    Ok(Command { thrust, orientation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn drag_examples() {
        let r = Rotation::identity();
        assert_eq!(drag_force(&r, &Vec3::zeros(), 0.3), Vec3::zeros());
        assert_relative_eq!(drag_force(&r, &Vec3::new(1.0, 0.0, 0.0), 0.3), Vec3::new(-0.3, 0.0, 0.0), epsilon = 1e-15);
        assert_eq!(drag_force(&r, &Vec3::new(0.0, 0.0, 5.0), 0.3), Vec3::zeros());
    }

    #[test]
    fn desired_force_examples() {
        let p = ControlParams::default();
        let hover = RobotState::default();
        let r = FlatReference::default();
        assert_relative_eq!(desired_force(&hover, &r, &p), Vec3::new(0.0, 0.0, p.mass * p.gravity), epsilon = 1e-12);

        let moving = RobotState {
            velocity: Vec3::new(15.0, 0.0, 0.0),
            ..Default::default()
        };
        let r = FlatReference {
            velocity: moving.velocity,
            ..Default::default()
        };
        assert_relative_eq!(
            desired_force(&moving, &r, &p),
            p.mass * Vec3::new(3.0, 0.0, p.gravity),
            epsilon = 1e-12
        );
        let off = ControlParams {
            drag_comp: false,
            ..p.clone()
        };
        assert_relative_eq!(desired_force(&moving, &r, &off), Vec3::new(0.0, 0.0, p.mass * p.gravity), epsilon = 1e-12);
    }

    #[test]
    fn hover_command() {
        let p = ControlParams::default();
        let r = FlatReference::hold(Vec3::zeros(), 0.7);
        let c = control_step(&RobotState::default(), &r, &p).unwrap();
        assert_relative_eq!(c.thrust, p.mass * p.gravity, epsilon = 1e-12);
        assert!(c.orientation.tilt() < 1e-12);
        assert_relative_eq!(c.orientation.yaw(), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn cruise_tilt_is_17_degrees() {
        let p = ControlParams::default();
        let s = RobotState {
            velocity: Vec3::new(15.0, 0.0, 0.0),
            ..Default::default()
        };
        let r = FlatReference {
            velocity: s.velocity,
            ..Default::default()
        };
        let c = control_step(&s, &r, &p).unwrap();
        let want = (3.0f64 / GRAVITY).atan();
        assert_relative_eq!(c.orientation.tilt(), want, epsilon = 1e-12);
        assert!((c.orientation.tilt().to_degrees() - 17.0).abs() < 0.05);
        // tilted into the direction of travel
        assert!(c.orientation.z_axis().x > 0.0);
    }

    #[test]
    fn thrust_saturates() {
        let p = ControlParams::default();
        let r = FlatReference {
            acceleration: Vec3::new(0.0, 0.0, 30.0),
            ..Default::default()
        };
        let c = control_step(&RobotState::default(), &r, &p).unwrap();
        assert_eq!(c.thrust, p.f_max);
    }

    #[test]
    fn thrust_uses_current_body_axis() {
        let p = ControlParams::default();
        let tilted = RobotState {
            orientation: Rotation::from_axis_angle(Vec3::y(), 0.5),
            ..Default::default()
        };
        let c = control_step(&tilted, &FlatReference::default(), &p).unwrap();
        assert_relative_eq!(c.thrust, p.mass * p.gravity * 0.5f64.cos(), epsilon = 1e-12);
    }

    #[test]
    fn excessive_tilt_is_limited() {
        let p = ControlParams::default();
        let r = FlatReference {
            acceleration: Vec3::new(100.0, 0.0, 0.0),
            ..Default::default()
        };
        let c = control_step(&RobotState::default(), &r, &p).unwrap();
        assert_relative_eq!(c.orientation.tilt(), p.max_tilt_deg.to_radians(), epsilon = 1e-9);
        let falling = FlatReference {
            acceleration: Vec3::new(0.0, 0.0, -p.gravity),
            ..Default::default()
        };
        assert_eq!(control_step(&RobotState::default(), &falling, &p), Err(ControlError::DegenerateForce));
    }

    proptest! {
        #[test]
        fn drag_is_orthogonal_to_body_z(
            axis in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
            angle in -3.1f64..3.1,
            v in (-20.0f64..20.0, -20.0f64..20.0, -20.0f64..20.0),
        ) {
            let a = Vec3::new(axis.0, axis.1, axis.2);
            prop_assume!(a.norm() > 1e-3);
            let r = Rotation::from_axis_angle(a.normalize(), angle);
            let d = drag_force(&r, &Vec3::new(v.0, v.1, v.2), 0.3);
            prop_assert!(d.dot(&r.z_axis()).abs() < 1e-12);
        }

        #[test]
        fn commanded_axis_is_unit(
            ex in (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0),
            v in (-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0),
            yaw in -3.0f64..3.0,
        ) {
            let p = ControlParams::default();
            let s = RobotState {
                position: Vec3::new(ex.0, ex.1, ex.2),
                velocity: Vec3::new(v.0, v.1, v.2),
                ..Default::default()
            };
            let r = FlatReference { yaw, ..Default::default() };
            if let Ok(c) = control_step(&s, &r, &p) {
                prop_assert!((c.orientation.z_axis().norm() - 1.0).abs() < 1e-12);
                prop_assert!(c.thrust >= 0.0 && c.thrust <= p.f_max);
            }
        }
    }
}
