//! Randomised planner checks: A* against the uniform-cost oracle, re-sampled
//! safety, and heuristic admissibility on expanded states.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::planner::heuristic::search_heuristic;
use crate::planner::oracle::dijkstra;
use crate::planner::{plan_traced, sample_times, CollisionQuery, PlannerParams, PrimitiveTrajectory};
use crate::state::Vec3;
use crate::world::{Aabb, Cylinder, GroundTruthEnv, UnknownPolicy, VoxelMap};

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub worlds: usize,
    pub seed: u64,
    pub size: [f64; 3],
    pub resolution: f64,
    pub obstacles: (usize, usize),
    pub robot_radius: f64,
    pub goal_tolerance: f64,
    pub params: PlannerParams,
    /// expanded states per world checked against an oracle cost-to-go
    pub admissibility_samples: usize,
    pub oracle_budget: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            worlds: 100,
            seed: 2024,
            size: [20.0, 20.0, 5.0],
            resolution: 0.5,
            obstacles: (10, 40),
            robot_radius: 0.3,
            goal_tolerance: 1.0,
            params: PlannerParams {
                a_max: 1.0,
                v_max: 2.0,
                accel_levels: Some(vec![-1.0, 0.0, 1.0]),
                primitive_duration: 1.0,
                max_expansions: 500_000,
                ..Default::default()
            },
            admissibility_samples: 3,
            oracle_budget: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteReport {
    pub worlds: usize,
    pub solved: usize,
    pub both_no_path: usize,
    pub cost_mismatches: usize,
    pub safety_violations: usize,
    pub admissibility_violations: usize,
    pub max_search_time: Duration,
    pub max_expansions: usize,
    pub failures: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self, time_limit: Duration) -> bool {
        self.cost_mismatches == 0
            && self.safety_violations == 0
            && self.admissibility_violations == 0
            && self.max_search_time < time_limit
            && self.solved > 0
    }
}

pub fn random_world(rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> GroundTruthEnv {
    let [sx, sy, sz] = cfg.size;
    let mut env = GroundTruthEnv::empty(Aabb::new(Vec3::zeros(), Vec3::new(sx, sy, sz)));
    let n = rng.random_range(cfg.obstacles.0..=cfg.obstacles.1);
    for _ in 0..n {
        let x = rng.random_range(0.0..sx);
        let y = rng.random_range(0.0..sy);
        if rng.random_bool(0.5) {
            let w = rng.random_range(0.3..2.5);
            let d = rng.random_range(0.3..2.5);
            let z0 = if rng.random_bool(0.7) { 0.0 } else { rng.random_range(0.0..sz * 0.6) };
            let h = rng.random_range(0.5..sz);
            env.boxes.push(Aabb::new(
                Vec3::new(x - 0.5 * w, y - 0.5 * d, z0),
                Vec3::new(x + 0.5 * w, y + 0.5 * d, (z0 + h).min(sz)),
            ));
        } else {
            env.cylinders.push(Cylinder {
                center: [x, y],
                radius: rng.random_range(0.15..1.0),
                z_min: 0.0,
                z_max: rng.random_range(1.0..sz),
            });
        }
    }
    env
}

fn free_point(rng: &mut ChaCha8Rng, cfg: &SuiteConfig, q: &CollisionQuery<'_>) -> Option<Vec3> {
    let [sx, sy, sz] = cfg.size;
    (0..200)
        .map(|_| Vec3::new(rng.random_range(0.5..sx - 0.5), rng.random_range(0.5..sy - 0.5), rng.random_range(0.5..sz - 0.5)))
        .find(|p| !q.blocked(p))
}

/// Every point at a tenth of the collision step is clear and within limits.
pub fn resampled_safe(traj: &PrimitiveTrajectory, q: &CollisionQuery<'_>, params: &PlannerParams) -> Result<(), String> {
    let dt = params.collision_dt() / 10.0;
    for (k, prim) in traj.primitives.iter().enumerate() {
        for t in sample_times(prim.duration, dt) {
            let p = prim.position_at(t);
            if q.blocked(&p) {
                return Err(format!("primitive {k} at t={t:.3}: {p:?} inside inflated occupancy"));
            }
            let v = prim.velocity_at(t);
            if v.amax() > params.v_max + 1e-9 || prim.input.amax() > params.a_max + 1e-9 {
                return Err(format!("primitive {k} at t={t:.3}: limit exceeded"));
            }
        }
    }
    Ok(())
}

pub fn run_suite(cfg: &SuiteConfig) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = SuiteReport::default();
    let params = &cfg.params;
    while report.worlds < cfg.worlds {
        let env = random_world(&mut rng, cfg);
        let mut map = VoxelMap::rasterize(&env, cfg.resolution);
        let plan_radius = cfg.robot_radius + 0.5 * params.sampling_gap();
        map.enable_inflation_cache(plan_radius);
        let q = CollisionQuery::new(&map, plan_radius, UnknownPolicy::Free);
        let physical = CollisionQuery::new(&map, cfg.robot_radius, UnknownPolicy::Free);
        let (Some(start), Some(goal)) = (free_point(&mut rng, cfg, &q), free_point(&mut rng, cfg, &q)) else {
            continue;
        };
        if (goal - start).norm() < 6.0 {
            continue;
        }
        let w = report.worlds;
        report.worlds += 1;

        let mut expanded = Vec::new();
        let t0 = Instant::now();
        let astar = plan_traced(&start, &Vec3::zeros(), &goal, cfg.goal_tolerance, &q, params, Some(&mut expanded));
        report.max_search_time = report.max_search_time.max(t0.elapsed());
        let oracle = dijkstra(&start, &Vec3::zeros(), &goal, cfg.goal_tolerance, &q, params, cfg.oracle_budget);

        if let Ok(out) = &astar {
            report.max_expansions = report.max_expansions.max(out.expansions);
        }
        match (&astar, &oracle) {
            (Ok(out), Ok(Some(best))) => {
                report.solved += 1;
                if out.trajectory.cost != best.cost {
                    report.cost_mismatches += 1;
                    report.failures.push(format!("world {w}: A* cost {} vs oracle {}", out.trajectory.cost, best.cost));
                }
                if let Err(e) = resampled_safe(&out.trajectory, &physical, params) {
                    report.safety_violations += 1;
                    report.failures.push(format!("world {w}: {e}"));
                }
            }
            (Err(e), Ok(None)) if e.is_no_path() => report.both_no_path += 1,
            (a, o) => {
                report.cost_mismatches += 1;
                report.failures.push(format!(
                    "world {w}: A* {:?} vs oracle {:?}",
                    a.as_ref().map(|o| o.trajectory.cost),
                    o.as_ref().map(|t| t.as_ref().map(|t| t.cost))
                ));
            }
        }

        if !expanded.is_empty() {
            for _ in 0..cfg.admissibility_samples {
                let (p, v) = expanded[rng.random_range(0..expanded.len())];
                let h = search_heuristic(&p, &v, &goal, cfg.goal_tolerance, params.goal_speed_tol(), params);
                if let Ok(Some(best)) = dijkstra(&p, &v, &goal, cfg.goal_tolerance, &q, params, cfg.oracle_budget) {
                    if h > best.cost {
                        report.admissibility_violations += 1;
                        report.failures.push(format!("world {w}: h {h} exceeds cost-to-go {}", best.cost));
                    }
                }
            }
        }
    }
    report
}
