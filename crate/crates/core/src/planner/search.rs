use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rustc_hash::FxHashMap;

use crate::planner::heuristic::search_heuristic;
use crate::planner::{successors_from, CollisionQuery, PlanError, PlannerParams, Primitive, PrimitiveTrajectory};
use crate::state::{all_finite, Vec3};
use crate::world::UnknownPolicy;

/// Quantised `(position, velocity)` relative to the search start.
pub type StateKey = [i64; 6];

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub trajectory: PrimitiveTrajectory,
    pub expansions: usize,
}

/// Lattice bookkeeping shared by the A* search and the Dijkstra oracle.
pub(crate) struct Lattice {
    p0: Vec3,
    v0: Vec3,
    qp: f64,
    qv: f64,
}

impl Lattice {
    pub(crate) fn new(p0: Vec3, v0: Vec3, params: &PlannerParams, query: &CollisionQuery<'_>) -> Self {
        Self {
            p0,
            v0,
            qp: params.position_quantum.unwrap_or(0.5 * query.map.resolution()),
            qv: params.velocity_quantum,
        }
    }

    pub(crate) fn key(&self, p: &Vec3, v: &Vec3) -> StateKey {
        let dp = (p - self.p0) / self.qp;
        let dv = (v - self.v0) / self.qv;
        [
            dp.x.round() as i64,
            dp.y.round() as i64,
            dp.z.round() as i64,
            dv.x.round() as i64,
            dv.y.round() as i64,
            dv.z.round() as i64,
        ]
    }
}

pub(crate) struct Node {
    pub pos: Vec3,
    pub vel: Vec3,
    pub g: f64,
    pub parent: Option<(usize, Primitive)>,
}

#[derive(Debug)]
pub(crate) struct OpenEntry {
    pub f: f64,
    pub h: f64,
    pub key: StateKey,
    pub node: usize,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenEntry {}
impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenEntry {
    // reversed: BinaryHeap pops the smallest f, then h, then key
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(other.h.total_cmp(&self.h))
            .then(other.key.cmp(&self.key))
            .then(other.node.cmp(&self.node))
    }
}

pub(crate) fn goal_reached(p: &Vec3, v: &Vec3, goal: &Vec3, tol: f64, vel_tol: f64) -> bool {
    (p - goal).norm() <= tol && (0..3).all(|i| v[i].abs() <= vel_tol + 1e-9)
}

pub(crate) fn reconstruct(nodes: &[Node], mut idx: usize) -> PrimitiveTrajectory {
    let mut prims = Vec::new();
    while let Some((parent, prim)) = nodes[idx].parent {
        prims.push(prim);
        idx = parent;
    }
    prims.reverse();
    let duration = prims.iter().map(|p| p.duration).sum();
    PrimitiveTrajectory {
        primitives: prims,
        cost: 0.0,
        duration,
    }
}

/// True when every point of the goal ball is provably blocked: each voxel its
/// bounding box touches is occupied (or unknown under the conservative policy)
/// and the rest lies outside the map.
pub(crate) fn goal_region_sealed(goal: &Vec3, tol: f64, query: &CollisionQuery<'_>) -> bool {
    let map = query.map;
    let res = map.resolution();
    let origin = map.origin();
    let dims = map.dims();
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for i in 0..3 {
        let a = ((goal[i] - tol - origin[i]) / res).floor();
        let b = ((goal[i] + tol - origin[i]) / res).floor();
        if b < 0.0 || a >= dims[i] as f64 {
            return true;
        }
        lo[i] = a.max(0.0) as usize;
        hi[i] = (b as usize).min(dims[i] - 1);
    }
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                let idx = [x, y, z];
                let blocked = map.is_occupied_index(idx)
                    || query.unknown == UnknownPolicy::Occupied && !map.is_observed_index(idx);
                if !blocked {
                    return false;
                }
            }
        }
    }
    true
}

pub(crate) fn check_inputs(
    start_pos: &Vec3,
    start_vel: &Vec3,
    goal: &Vec3,
    goal_tolerance: f64,
    params: &PlannerParams,
) -> Result<(), PlanError> {
    if !all_finite(start_pos) || !all_finite(start_vel) || !all_finite(goal) {
        return Err(PlanError::Invalid("non-finite start or goal".into()));
    }
    if !(goal_tolerance > 0.0) {
        return Err(PlanError::Invalid("goal tolerance must be positive".into()));
    }
    let errs = params.validate("planner");
    if !errs.is_empty() {
        return Err(PlanError::Invalid(errs.join("; ")));
    }
    Ok(())
}

/// A* over the primitive lattice. The returned trajectory is cost-optimal
/// among lattice paths that end within `goal_tolerance` of `goal` with every
/// velocity component below the goal speed tolerance.
pub fn plan(
    start_pos: &Vec3,
    start_vel: &Vec3,
    goal: &Vec3,
    goal_tolerance: f64,
    query: &CollisionQuery<'_>,
    params: &PlannerParams,
) -> Result<PlanOutcome, PlanError> {
    plan_traced(start_pos, start_vel, goal, goal_tolerance, query, params, None)
}

/// [`plan`], optionally recording the state of every expansion.
pub fn plan_traced(
    start_pos: &Vec3,
    start_vel: &Vec3,
    goal: &Vec3,
    goal_tolerance: f64,
    query: &CollisionQuery<'_>,
    params: &PlannerParams,
    mut trace: Option<&mut Vec<(Vec3, Vec3)>>,
) -> Result<PlanOutcome, PlanError> {
    check_inputs(start_pos, start_vel, goal, goal_tolerance, params)?;
    if query.blocked(start_pos) {
        return Err(PlanError::StartInCollision);
    }
    let vel_tol = params.goal_speed_tol();
    if goal_reached(start_pos, start_vel, goal, goal_tolerance, vel_tol) {
        return Ok(PlanOutcome {
            trajectory: PrimitiveTrajectory::default(),
            expansions: 0,
        });
    }
    if goal_region_sealed(goal, goal_tolerance, query) {
        return Err(PlanError::GoalUnreachable { expansions: 0 });
    }

    let inputs = params.inputs();
    let lattice = Lattice::new(*start_pos, *start_vel, params, query);
    let h = |p: &Vec3, v: &Vec3| search_heuristic(p, v, goal, goal_tolerance, vel_tol, params);

    let mut nodes = vec![Node {
        pos: *start_pos,
        vel: *start_vel,
        g: 0.0,
        parent: None,
    }];
    let mut best: FxHashMap<StateKey, usize> = FxHashMap::default();
    let start_key = lattice.key(start_pos, start_vel);
    best.insert(start_key, 0);
    let h0 = h(start_pos, start_vel);
    let mut open = BinaryHeap::new();
    open.push(OpenEntry {
        f: h0,
        h: h0,
        key: start_key,
        node: 0,
    });

    let mut expansions = 0usize;
    while let Some(entry) = open.pop() {
        if best.get(&entry.key) != Some(&entry.node) {
            continue;
        }
        let (pos, vel, g) = {
            let n = &nodes[entry.node];
            (n.pos, n.vel, n.g)
        };
        if goal_reached(&pos, &vel, goal, goal_tolerance, vel_tol) {
            let mut trajectory = reconstruct(&nodes, entry.node);
            trajectory.cost = g;
            log::debug!("plan found: cost {g} after {expansions} expansions");
            return Ok(PlanOutcome { trajectory, expansions });
        }
        if expansions >= params.max_expansions {
            return Err(PlanError::ExpansionLimit {
                limit: params.max_expansions,
            });
        }
        expansions += 1;
        if let Some(t) = trace.as_deref_mut() {
            t.push((pos, vel));
        }
        for (prim, cost) in successors_from(&pos, &vel, &inputs, params, query) {
            let (p2, v2) = prim.end();
            let g2 = g + cost;
            let key = lattice.key(&p2, &v2);
            if let Some(&existing) = best.get(&key) {
                if nodes[existing].g <= g2 {
                    continue;
                }
            }
            let idx = nodes.len();
            nodes.push(Node {
                pos: p2,
                vel: v2,
                g: g2,
                parent: Some((entry.node, prim)),
            });
            best.insert(key, idx);
            let h2 = h(&p2, &v2);
            open.push(OpenEntry {
                f: g2 + h2,
                h: h2,
                key,
                node: idx,
            });
        }
    }
    Err(PlanError::GoalUnreachable { expansions })
}
