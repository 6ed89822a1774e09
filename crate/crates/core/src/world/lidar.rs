//! Planar scanning lidar on a one-axis nodding mount.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::state::{Rotation, RobotState, Vec3};
use crate::world::env::GroundTruthEnv;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LidarParams {
    /// m
    pub max_range: f64,
    /// rad between adjacent beams
    pub angular_resolution: f64,
    /// rad, centred on the sensor x axis
    pub field_of_view: f64,
    /// Hz
    pub scan_rate: f64,
    /// rad; 0 keeps the scan plane fixed
    pub nod_amplitude: f64,
    /// s
    pub nod_period: f64,
    /// sensor origin in the body frame, m
    pub mount_offset: [f64; 3],
    /// fixed roll, pitch, yaw of the mount relative to the body, rad
    pub mount_rpy: [f64; 3],
}

impl Default for LidarParams {
    fn default() -> Self {
        Self {
            max_range: 30.0,
            angular_resolution: 0.25f64.to_radians(),
            field_of_view: 270f64.to_radians(),
            scan_rate: 40.0,
            nod_amplitude: 30f64.to_radians(),
            nod_period: 2.0,
            mount_offset: [0.0, 0.0, 0.1],
            mount_rpy: [0.0, 0.0, 0.0],
        }
    }
}

impl LidarParams {
    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.max_range > 0.0) {
            errs.push(format!("{prefix}.max_range: must be positive"));
        }
        if !(self.angular_resolution > 0.0) {
            errs.push(format!("{prefix}.angular_resolution: must be positive"));
        }
        if !(self.field_of_view > 0.0 && self.field_of_view <= 2.0 * PI) {
            errs.push(format!("{prefix}.field_of_view: must lie in (0, 2π]"));
        }
        if !(self.scan_rate > 0.0) {
            errs.push(format!("{prefix}.scan_rate: must be positive"));
        }
        if !(0.0..=PI / 2.0).contains(&self.nod_amplitude) {
            errs.push(format!("{prefix}.nod_amplitude: must lie in [0, π/2]"));
        }
        if !(self.nod_period > 0.0) {
            errs.push(format!("{prefix}.nod_period: must be positive"));
        }
        errs
    }

    /// Number of beams in one fan.
    pub fn beam_count(&self) -> usize {
        let n = (self.field_of_view / self.angular_resolution + 1e-9).floor() as usize;
        // a full circle would repeat its first beam
        if self.field_of_view >= 2.0 * PI - 1e-12 {
            n.max(1)
        } else {
            n + 1
        }
    }

    fn mount_rotation(&self) -> Rotation {
        let [r, p, y] = self.mount_rpy;
        Rotation::from_axis_angle(Vec3::z(), y)
            .compose(&Rotation::from_axis_angle(Vec3::y(), p))
            .compose(&Rotation::from_axis_angle(Vec3::x(), r))
    }
}

/// Nod angle (pitch of the scan plane about the mount y axis) at time `t`.
pub fn gimbal_angle(t: f64, p: &LidarParams) -> f64 {
    p.nod_amplitude * (2.0 * PI * t / p.nod_period).sin()
}

/// One beam of a scan in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRay {
    pub origin: Vec3,
    pub direction: Vec3,
    pub range: Option<f64>,
}

impl ScanRay {
    pub fn hit_point(&self) -> Option<Vec3> {
        self.range.map(|r| self.origin + self.direction * r)
    }
}

/// Every beam of the fan at time `t`, including misses.
pub fn simulate_scan_rays(
    env: &GroundTruthEnv,
    state: &RobotState,
    t: f64,
    p: &LidarParams,
) -> Vec<ScanRay> {
    let nod = Rotation::from_axis_angle(Vec3::y(), gimbal_angle(t, p));
    let sensor = state
        .orientation
        .compose(&p.mount_rotation())
        .compose(&nod);
    let origin = state.position + state.orientation.rotate(&Vec3::from(p.mount_offset));
    let n = p.beam_count();
    let first = -0.5 * p.field_of_view;
    (0..n)
        .map(|k| {
            let bearing = first + k as f64 * p.angular_resolution;
            let dir = sensor.rotate(&Vec3::new(bearing.cos(), bearing.sin(), 0.0));
            ScanRay {
                origin,
                direction: dir,
                range: env.raycast(&origin, &dir, p.max_range),
            }
        })
        .collect()
}

/// World-frame hit points of the fan at time `t`; misses are omitted.
pub fn simulate_scan(env: &GroundTruthEnv, state: &RobotState, t: f64, p: &LidarParams) -> Vec<Vec3> {
    simulate_scan_rays(env, state, t, p)
        .iter()
        .filter_map(ScanRay::hit_point)
        .collect()
}
