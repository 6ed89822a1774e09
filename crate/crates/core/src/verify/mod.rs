//! Acceptance checks, oracle suites and log metrics.

pub mod acceptance;
pub mod metrics;
pub mod planner_suite;
