//! Ground-truth environment, simulated nodding lidar and the voxel map built
//! from its scans.

pub mod env;
pub mod lidar;
pub mod voxel;

pub use env::{Aabb, Cylinder, GroundTruthEnv};
pub use lidar::{gimbal_angle, simulate_scan, simulate_scan_rays, LidarParams, ScanRay};
pub use voxel::{UnknownPolicy, VoxelMap};
