//! Kinodynamic navigation for a quadrotor in partially known 3D environments:
//! an occupancy map built from a nodding planar lidar, a motion-primitive
//! search, polynomial refinement, geometric tracking control and a closed-loop
//! simulator.

pub mod cli;
pub mod control;
pub mod planner;
pub mod poly;
pub mod refine;
pub mod scenario;
pub mod sim;
pub mod state;
pub mod verify;
pub mod world;
