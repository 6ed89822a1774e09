//! Gaussian perturbation of the true state standing in for an estimator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::state::{RobotState, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseParams {
    /// m
    pub position_sigma: f64,
    /// m/s
    pub velocity_sigma: f64,
    /// Overrides the scenario seed when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            position_sigma: 0.0,
            velocity_sigma: 0.0,
            seed: None,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.position_sigma >= 0.0 && self.position_sigma.is_finite()) {
            errs.push(format!("{prefix}.position_sigma: must be non-negative"));
        }
        if !(self.velocity_sigma >= 0.0 && self.velocity_sigma.is_finite()) {
            errs.push(format!("{prefix}.velocity_sigma: must be non-negative"));
        }
        errs
    }
}

fn perturb(v: &Vec3, sigma: f64, rng: &mut ChaCha8Rng) -> Vec3 {
    if sigma == 0.0 {
        return *v;
    }
    let n = Normal::new(0.0, sigma).expect("sigma validated");
    Vec3::new(v.x + n.sample(rng), v.y + n.sample(rng), v.z + n.sample(rng))
}

/// Noisy copy of `state`. Zero sigmas return the state unchanged and draw
/// nothing from `rng`.
pub fn estimate(state: &RobotState, np: &NoiseParams, rng: &mut ChaCha8Rng) -> RobotState {
    RobotState {
        position: perturb(&state.position, np.position_sigma, rng),
        velocity: perturb(&state.velocity, np.velocity_sigma, rng),
        ..*state
    }
}

pub fn noise_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
