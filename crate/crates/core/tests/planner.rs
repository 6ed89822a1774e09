use kinonav::planner::oracle::dijkstra;
use kinonav::planner::{plan, CollisionQuery, PlanError, PlannerParams};
use kinonav::state::Vec3;
use kinonav::world::{Aabb, GroundTruthEnv, UnknownPolicy, VoxelMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_params() -> PlannerParams {
    PlannerParams {
        a_max: 2.0,
        v_max: 4.0,
        accel_levels: Some(vec![-2.0, 0.0, 2.0]),
        primitive_duration: 1.0,
        ..Default::default()
    }
}

fn random_env(rng: &mut ChaCha8Rng) -> GroundTruthEnv {
    let mut env = GroundTruthEnv::empty(Aabb::new(Vec3::zeros(), Vec3::new(16.0, 16.0, 6.0)));
    for _ in 0..rng.random_range(2..7) {
        let x = rng.random_range(4.0..12.0);
        let y = rng.random_range(1.0..15.0);
        let w = rng.random_range(0.5..2.5);
        let d = rng.random_range(0.5..4.0);
        env.boxes.push(Aabb::new(Vec3::new(x, y, 0.0), Vec3::new(x + w, y + d, rng.random_range(2.0..6.0))));
    }
    env
}

#[test]
fn astar_cost_matches_dijkstra_on_random_maps() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let params = small_params();
    let mut compared = 0;
    for _ in 0..6 {
        let env = random_env(&mut rng);
        let map = VoxelMap::rasterize(&env, 0.5);
        let q = CollisionQuery::new(&map, 0.3, UnknownPolicy::Free);
        let start = Vec3::new(2.0, 8.0, 3.0);
        let goal = Vec3::new(14.0, 8.0, 3.0);
        if q.blocked(&start) || q.blocked(&goal) {
            continue;
        }
        let a = plan(&start, &Vec3::zeros(), &goal, 1.0, &q, &params);
        let d = dijkstra(&start, &Vec3::zeros(), &goal, 1.0, &q, &params, 2_000_000).unwrap();
        match (a, d) {
            (Ok(out), Some(opt)) => {
                assert_eq!(out.trajectory.cost, opt.cost);
                compared += 1;
            }
            (Err(e), None) => assert!(e.is_no_path()),
            (a, d) => panic!("disagreement: {a:?} vs {:?}", d.map(|t| t.cost)),
        }
    }
    assert!(compared >= 3);
}

#[test]
fn path_is_free_and_reaches_goal() {
    let mut env = GroundTruthEnv::empty(Aabb::new(Vec3::zeros(), Vec3::new(30.0, 20.0, 8.0)));
    env.boxes.push(Aabb::new(Vec3::new(12.0, 0.0, 0.0), Vec3::new(14.0, 14.0, 8.0)));
    let map = VoxelMap::rasterize(&env, 0.5);
    let q = CollisionQuery::new(&map, 0.3, UnknownPolicy::Free);
    let params = PlannerParams::default();
    let goal = Vec3::new(25.0, 5.0, 4.0);
    let out = plan(&Vec3::new(3.0, 5.0, 4.0), &Vec3::zeros(), &goal, 1.0, &q, &params).unwrap();
    let traj = &out.trajectory;
    assert!(!traj.is_empty());
    let (end, vend) = traj.end_state().unwrap();
    assert!((end - goal).norm() <= 1.0);
    assert!(vend.amax() <= params.goal_speed_tol() + 1e-9);
    let mut t = 0.0;
    while t <= traj.duration {
        let (p, v, a) = traj.sample(t);
        assert!(!q.blocked(&p), "collision at {t}");
        assert!(v.amax() <= params.v_max + 1e-9);
        assert!(a.amax() <= params.a_max + 1e-9);
        assert!(env.clearance(&p) >= 0.3 - 1e-9);
        t += 0.01;
    }
}

#[test]
fn sealed_goal_reports_no_path() {
    let mut env = GroundTruthEnv::empty(Aabb::new(Vec3::zeros(), Vec3::new(20.0, 20.0, 8.0)));
    env.boxes.push(Aabb::new(Vec3::new(14.0, 9.0, 2.0), Vec3::new(17.0, 12.0, 5.0)));
    let map = VoxelMap::rasterize(&env, 0.5);
    let q = CollisionQuery::new(&map, 0.3, UnknownPolicy::Free);
    let err = plan(&Vec3::new(3.0, 3.0, 3.0), &Vec3::zeros(), &Vec3::new(15.5, 10.5, 3.5), 0.5, &q, &PlannerParams::default())
        .unwrap_err();
    assert!(matches!(err, PlanError::GoalUnreachable { .. }));
}

#[test]
fn start_in_collision_is_reported() {
    let mut env = GroundTruthEnv::empty(Aabb::new(Vec3::zeros(), Vec3::new(20.0, 20.0, 8.0)));
    env.boxes.push(Aabb::new(Vec3::new(2.0, 2.0, 2.0), Vec3::new(4.0, 4.0, 4.0)));
    let map = VoxelMap::rasterize(&env, 0.5);
    let q = CollisionQuery::new(&map, 0.3, UnknownPolicy::Free);
    let err = plan(&Vec3::new(3.0, 3.0, 3.0), &Vec3::zeros(), &Vec3::new(15.0, 15.0, 3.0), 1.0, &q, &PlannerParams::default())
        .unwrap_err();
    assert_eq!(err, PlanError::StartInCollision);
}

#[test]
fn planning_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let env = random_env(&mut rng);
    let map = VoxelMap::rasterize(&env, 0.5);
    let q = CollisionQuery::new(&map, 0.3, UnknownPolicy::Free);
    let run = || plan(&Vec3::new(1.0, 1.0, 1.0), &Vec3::zeros(), &Vec3::new(15.0, 14.0, 3.0), 1.0, &q, &PlannerParams::default());
    let (a, b) = (run(), run());
    match (a, b) {
        (Ok(a), Ok(b)) => {
            assert_eq!(a.trajectory, b.trajectory);
            assert_eq!(a.expansions, b.expansions);
        }
        (a, b) => assert_eq!(a.err(), b.err()),
    }
}
