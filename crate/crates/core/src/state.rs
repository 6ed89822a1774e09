//! Shared kinematic types: vectors, world-from-body rotations, robot states and
//! flat-output references.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use thiserror::Error;

/// Three-component real vector. Units depend on context (m, m/s, m/s², N).
pub type Vec3 = Vector3<f64>;

/// Largest tilt accepted when building an attitude from a thrust direction.
pub const MAX_TILT: f64 = 89.0 * PI / 180.0;

const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("thrust direction is not unit length (|b3| = {0})")]
    NotUnit(f64),
    #[error("degenerate attitude: tilt {tilt_deg:.2} deg exceeds {max_deg:.1} deg")]
    ExcessiveTilt { tilt_deg: f64, max_deg: f64 },
    #[error("matrix is not a proper rotation (orthonormality error {0:e})")]
    NotRotation(f64),
}

/// World-from-body rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates orthonormality and a positive determinant.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let err = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if !err.is_finite() || err > ORTHONORMAL_TOL || (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(GeometryError::NotRotation(err.max((det - 1.0).abs())));
        }
        Ok(Self(m))
    }

    pub fn from_yaw(yaw: f64) -> Self {
        Self(*Rotation3::from_axis_angle(&Vector3::z_axis(), yaw).matrix())
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(axis);
        Self(*Rotation3::from_axis_angle(&axis, angle).matrix())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    pub fn compose(&self, other: &Rotation) -> Self {
        Self(self.0 * other.0)
    }

    /// First body axis in the world frame.
    pub fn x_axis(&self) -> Vec3 {
        self.0.column(0).into()
    }

    pub fn y_axis(&self) -> Vec3 {
        self.0.column(1).into()
    }

    /// Body z axis (thrust direction) in the world frame.
    pub fn z_axis(&self) -> Vec3 {
        self.0.column(2).into()
    }

    /// atan2 of the first body axis projected onto the world x-y plane.
    pub fn yaw(&self) -> f64 {
        wrap_angle(self.0[(1, 0)].atan2(self.0[(0, 0)]))
    }

    /// Angle between body z and world z.
    pub fn tilt(&self) -> f64 {
        self.0[(2, 2)].clamp(-1.0, 1.0).acos()
    }

    /// Rotates toward `target` along the geodesic by `fraction` in [0, 1].
    pub fn slerp_toward(&self, target: &Rotation, fraction: f64) -> Self {
        let qa = UnitQuaternion::from_matrix(&self.0);
        let qb = UnitQuaternion::from_matrix(&target.0);
        let f = fraction.clamp(0.0, 1.0);
        // near-antipodal pairs have no unique slerp path; step via the axis
        let q = qa.try_slerp(&qb, f, 1e-9).unwrap_or_else(|| match qa.rotation_to(&qb).axis_angle() {
            Some((axis, angle)) => UnitQuaternion::from_axis_angle(&axis, angle * f) * qa,
            None => qb,
        });
        Self(renormalize(*q.to_rotation_matrix().matrix()))
    }

    /// Largest deviation of RᵀR from identity.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).abs().max()
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }
}

fn renormalize(m: Matrix3<f64>) -> Matrix3<f64> {
    let z = m.column(2).normalize();
    let x0: Vec3 = m.column(0).into();
    let x = (x0 - z * z.dot(&x0)).normalize();
    let y = z.cross(&x);
    Matrix3::from_columns(&[x, y, z])
}

/// Wraps an angle into [-π, π).
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Builds the attitude whose body z axis is `b3` and whose heading follows `yaw`.
///
/// The first body axis is the unit projection of `(cos yaw, sin yaw, 0)` onto the
/// plane normal to `b3`; the second completes a right-handed frame.
pub fn rotation_from_z_and_yaw(b3: Vec3, yaw: f64) -> Result<Rotation, GeometryError> {
    let n = b3.norm();
    if !n.is_finite() || (n - 1.0).abs() > 1e-9 {
        return Err(GeometryError::NotUnit(n));
    }
    let tilt = b3.z.clamp(-1.0, 1.0).acos();
    if tilt >= MAX_TILT {
        return Err(GeometryError::ExcessiveTilt {
            tilt_deg: tilt.to_degrees(),
            max_deg: MAX_TILT.to_degrees(),
        });
    }
    let heading = Vec3::new(yaw.cos(), yaw.sin(), 0.0);
    let b1 = (heading - b3 * b3.dot(&heading)).normalize();
    let b2 = b3.cross(&b1);
    Ok(Rotation(Matrix3::from_columns(&[b1, b2, b3])))
}

/// Full kinematic state of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RobotState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub orientation: Rotation,
    pub time: f64,
}

impl RobotState {
    pub fn at_rest(position: Vec3) -> Self {
        Self {
            position,
            ..Default::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.position) && all_finite(&self.velocity) && self.time.is_finite()
    }
}

/// Position reference and its derivatives at one instant, plus heading.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlatReference {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub jerk: Vec3,
    pub yaw: f64,
}

impl FlatReference {
    pub fn hold(position: Vec3, yaw: f64) -> Self {
        Self {
            position,
            yaw: wrap_angle(yaw),
            ..Default::default()
        }
    }
}

pub fn all_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn level_thrust_zero_yaw_is_identity() {
        let r = rotation_from_z_and_yaw(Vec3::z(), 0.0).unwrap();
        assert_relative_eq!(*r.matrix(), Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn level_thrust_quarter_turn_yaw() {
        let r = rotation_from_z_and_yaw(Vec3::z(), PI / 2.0).unwrap();
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(*r.matrix(), expected, epsilon = 1e-15);
        assert_relative_eq!(r.yaw(), PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn tilted_thrust_gives_orthonormal_frame() {
        let t = 10f64.to_radians();
        let b3 = Vec3::new(t.sin(), 0.0, t.cos());
        let r = rotation_from_z_and_yaw(b3, 0.0).unwrap();
        assert!(r.orthonormality_error() < 1e-12);
        assert_relative_eq!(r.z_axis().dot(&b3), 1.0, epsilon = 1e-12);
        // first column stays in the x-z plane for zero yaw
        assert!(r.x_axis().y.abs() < 1e-15);
        assert_relative_eq!(r.tilt(), t, epsilon = 1e-12);
    }

    #[test]
    fn rejects_near_horizontal_thrust() {
        let t = 89.5f64.to_radians();
        let b3 = Vec3::new(t.sin(), 0.0, t.cos());
        assert!(matches!(
            rotation_from_z_and_yaw(b3, 0.0),
            Err(GeometryError::ExcessiveTilt { .. })
        ));
        assert!(matches!(
            rotation_from_z_and_yaw(-Vec3::z(), 0.0),
            Err(GeometryError::ExcessiveTilt { .. })
        ));
        assert!(matches!(
            rotation_from_z_and_yaw(Vec3::new(0.0, 0.0, 2.0), 0.0),
            Err(GeometryError::NotUnit(_))
        ));
    }

    #[test]
    fn wrap_angle_range() {
        assert_relative_eq!(wrap_angle(PI), -PI);
        assert_relative_eq!(wrap_angle(-PI), -PI);
        assert_relative_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(0.25), 0.25);
    }

    #[test]
    fn slerp_reaches_target() {
        let a = Rotation::identity();
        let b = Rotation::from_axis_angle(Vec3::new(1.0, 2.0, 0.5), 0.7);
        let half = a.slerp_toward(&b, 0.5);
        let full = a.slerp_toward(&b, 1.0);
        assert!((full.matrix() - b.matrix()).abs().max() < 1e-12);
        assert!(half.orthonormality_error() < 1e-12);
        assert!(a.slerp_toward(&a, 0.3).orthonormality_error() < 1e-12);
    }

    #[test]
    fn slerp_between_nearly_equal_rotations_is_finite() {
        // products of yaw rotations pick up rounding that puts the trace above 3
        let mut r = Rotation::from_yaw(0.3);
        for k in 0..2000 {
            let target = Rotation::from_yaw(0.3 + 1e-15 * (k % 3) as f64);
            r = r.slerp_toward(&target, 0.05);
            assert!(r.matrix().iter().all(|v| v.is_finite()), "step {k}");
        }
        let b = Rotation::from_axis_angle(Vec3::x(), 3.1415926);
        assert!(Rotation::identity().slerp_toward(&b, 0.5).matrix().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn from_matrix_validates() {
        assert!(Rotation::from_matrix(Matrix3::identity()).is_ok());
        assert!(Rotation::from_matrix(Matrix3::identity() * 2.0).is_err());
        let reflect = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(Rotation::from_matrix(reflect).is_err());
    }

    proptest! {
        #[test]
        fn attitude_is_always_proper(
            theta in 0.0f64..88.9,
            phi in -PI..PI,
            yaw in -PI..PI,
        ) {
            let t = theta.to_radians();
            let b3 = Vec3::new(t.sin() * phi.cos(), t.sin() * phi.sin(), t.cos());
            let r = rotation_from_z_and_yaw(b3, yaw).unwrap();
            prop_assert!(r.orthonormality_error() < 1e-9);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
            prop_assert!((r.z_axis() - b3).norm() < 1e-12);
        }
    }
}
