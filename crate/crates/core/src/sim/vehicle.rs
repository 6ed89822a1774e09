//! Translational rigid-body plant with thrust along body z, gravity and
//! linear drag, plus an attitude response model.

use serde::{Deserialize, Serialize};

use crate::control::{drag_force, Command, GRAVITY};
use crate::state::{RobotState, Rotation, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DragModel {
    /// `−k_d v`
    #[default]
    Isotropic,
    /// `−k_d R P Rᵀ v`: drag acts only in the body x-y plane.
    BodyPlanar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AttitudeMode {
    /// Orientation follows the command instantly.
    Ideal,
    /// Geodesic first-order lag with time constant `attitude_tau`.
    #[default]
    FirstOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// kg/s
    pub k_d: f64,
    /// N
    pub f_max: f64,
    /// s
    pub attitude_tau: f64,
    pub attitude_mode: AttitudeMode,
    pub drag_model: DragModel,
}

impl Default for VehicleParams {
    fn default() -> Self {
        let mass = 1.5;
        Self {
            mass,
            k_d: 0.2 * mass,
            f_max: 2.0 * mass * GRAVITY,
            attitude_tau: 0.1,
            attitude_mode: AttitudeMode::FirstOrder,
            drag_model: DragModel::Isotropic,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.mass > 0.0) {
            errs.push(format!("{prefix}.mass: must be positive"));
        }
        if !(self.k_d >= 0.0) {
            errs.push(format!("{prefix}.k_d: must be non-negative"));
        }
        if !(self.f_max > 0.0) {
            errs.push(format!("{prefix}.f_max: must be positive"));
        }
        if self.attitude_mode == AttitudeMode::FirstOrder && !(self.attitude_tau > 0.0) {
            errs.push(format!("{prefix}.attitude_tau: must be positive in first_order mode"));
        }
        errs
    }

    pub fn drag(&self, r: &Rotation, v: &Vec3) -> Vec3 {
        match self.drag_model {
            DragModel::Isotropic => -self.k_d * v,
            DragModel::BodyPlanar => drag_force(r, v, self.k_d),
        }
    }

    /// Linear acceleration for a given attitude, thrust and velocity.
    pub fn acceleration(&self, r: &Rotation, thrust: f64, v: &Vec3) -> Vec3 {
        let thrust = thrust.clamp(0.0, self.f_max);
        (r.z_axis() * thrust + self.drag(r, v)) / self.mass - Vec3::new(0.0, 0.0, GRAVITY)
    }
}

/// Advances the state by `dt` under a constant command: RK4 on position and
/// velocity with the attitude held at its step-start value, then the attitude
/// update.
pub fn dynamics_step(state: &RobotState, cmd: &Command, dt: f64, vp: &VehicleParams) -> RobotState {
    let r = state.orientation;
    let f = |v: &Vec3| vp.acceleration(&r, cmd.thrust, v);
    let (p0, v0) = (state.position, state.velocity);
    let k1v = f(&v0);
    let k1p = v0;
    let v1 = v0 + k1v * (0.5 * dt);
    let k2v = f(&v1);
    let k2p = v1;
    let v2 = v0 + k2v * (0.5 * dt);
    let k3v = f(&v2);
    let k3p = v2;
    let v3 = v0 + k3v * dt;
    let k4v = f(&v3);
    let k4p = v3;
    let position = p0 + (k1p + 2.0 * k2p + 2.0 * k3p + k4p) * (dt / 6.0);
    let velocity = v0 + (k1v + 2.0 * k2v + 2.0 * k3v + k4v) * (dt / 6.0);
    let orientation = match vp.attitude_mode {
        AttitudeMode::Ideal => cmd.orientation,
        AttitudeMode::FirstOrder => r.slerp_toward(&cmd.orientation, 1.0 - (-dt / vp.attitude_tau).exp()),
    };
    RobotState {
        position,
        velocity,
        orientation,
        time: state.time + dt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn hover_cmd(vp: &VehicleParams) -> Command {
        Command {
            thrust: vp.mass * GRAVITY,
            orientation: Rotation::identity(),
        }
    }

    #[test]
    fn hover_is_equilibrium() {
        let vp = VehicleParams::default();
        let mut s = RobotState::at_rest(Vec3::new(1.0, 2.0, 3.0));
        for _ in 0..1000 {
            s = dynamics_step(&s, &hover_cmd(&vp), 1e-3, &vp);
        }
        assert!((s.position - Vec3::new(1.0, 2.0, 3.0)).norm() < 1e-9);
        assert!(s.velocity.norm() < 1e-9);
    }

    #[test]
    fn drag_deceleration_at_step_start() {
        for model in [DragModel::Isotropic, DragModel::BodyPlanar] {
            let vp = VehicleParams {
                drag_model: model,
                ..Default::default()
            };
            let a = vp.acceleration(&Rotation::identity(), vp.mass * GRAVITY, &Vec3::new(10.0, 0.0, 0.0));
            assert_relative_eq!(a, Vec3::new(-vp.k_d / vp.mass * 10.0, 0.0, 0.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn body_planar_ignores_vertical_drag() {
        let vp = VehicleParams {
            drag_model: DragModel::BodyPlanar,
            ..Default::default()
        };
        let a = vp.acceleration(&Rotation::identity(), vp.mass * GRAVITY, &Vec3::new(0.0, 0.0, 5.0));
        assert!(a.norm() < 1e-12);
        let iso = VehicleParams::default();
        let a = iso.acceleration(&Rotation::identity(), iso.mass * GRAVITY, &Vec3::new(0.0, 0.0, 5.0));
        assert_relative_eq!(a.z, -iso.k_d / iso.mass * 5.0, epsilon = 1e-12);
    }

    #[test]
    fn thrust_is_clamped() {
        let vp = VehicleParams::default();
        let a = vp.acceleration(&Rotation::identity(), 10.0 * vp.f_max, &Vec3::zeros());
        assert_relative_eq!(a.z, vp.f_max / vp.mass - GRAVITY, epsilon = 1e-12);
    }

    #[test]
    fn rk4_fourth_order_convergence() {
        // tilted, drag-dominated manoeuvre; error against a dt/100 reference
        let vp = VehicleParams::default();
        let cmd = Command {
            thrust: 1.3 * vp.mass * GRAVITY,
            orientation: Rotation::from_axis_angle(Vec3::new(1.0, 1.0, 0.0).normalize(), 0.4),
        };
        let start = RobotState {
            velocity: Vec3::new(3.0, -1.0, 2.0),
            orientation: cmd.orientation,
            ..Default::default()
        };
        let run = |dt: f64, steps: usize| {
            let mut s = start;
            for _ in 0..steps {
                s = dynamics_step(&s, &cmd, dt, &vp);
            }
            s
        };
        // large steps so the error sits well above rounding
        let coarse = 0.8;
        let reference = run(coarse / 100.0, 1000);
        let e1 = (run(coarse, 10).position - reference.position).norm();
        let e2 = (run(coarse / 2.0, 20).position - reference.position).norm();
        let ratio = e1 / e2;
        assert!((12.0..20.0).contains(&ratio), "error ratio {ratio} ({e1} vs {e2})");
    }

    #[test]
    fn first_order_attitude_lag() {
        let vp = VehicleParams::default();
        let target = Rotation::from_axis_angle(Vec3::x(), 0.3);
        let cmd = Command {
            thrust: vp.mass * GRAVITY,
            orientation: target,
        };
        let mut s = RobotState::default();
        for _ in 0..100 {
            s = dynamics_step(&s, &cmd, 1e-3, &vp);
        }
        // one time constant: 1 − e⁻¹ of the angle
        assert_relative_eq!(s.orientation.tilt(), 0.3 * (1.0 - (-1.0f64).exp()), epsilon = 1e-9);
        let ideal = VehicleParams {
            attitude_mode: AttitudeMode::Ideal,
            ..vp
        };
        let s = dynamics_step(&RobotState::default(), &cmd, 1e-3, &ideal);
        assert_eq!(s.orientation, target);
    }
}
