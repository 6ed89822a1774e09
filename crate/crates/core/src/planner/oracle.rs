//! Uniform-cost search over the same lattice and successor function as the
//! planner, with no heuristic. Used to cross-check optimal costs.

use std::collections::BinaryHeap;

use rustc_hash::FxHashMap;

use crate::planner::search::{
    check_inputs, goal_reached, reconstruct, Lattice, Node, OpenEntry, StateKey,
};
use crate::planner::{successors_from, CollisionQuery, PlanError, PlannerParams, PrimitiveTrajectory};
use crate::state::Vec3;

/// Optimal lattice path by Dijkstra's algorithm, or `None` when the reachable
/// set is exhausted (or `budget` expansions pass) without reaching the goal.
pub fn dijkstra(
    start_pos: &Vec3,
    start_vel: &Vec3,
    goal: &Vec3,
    goal_tolerance: f64,
    query: &CollisionQuery<'_>,
    params: &PlannerParams,
    budget: usize,
) -> Result<Option<PrimitiveTrajectory>, PlanError> {
    check_inputs(start_pos, start_vel, goal, goal_tolerance, params)?;
    if query.blocked(start_pos) {
        return Err(PlanError::StartInCollision);
    }
    let vel_tol = params.goal_speed_tol();
    let inputs = params.inputs();
    let lattice = Lattice::new(*start_pos, *start_vel, params, query);
    let mut nodes = vec![Node {
        pos: *start_pos,
        vel: *start_vel,
        g: 0.0,
        parent: None,
    }];
    let mut best: FxHashMap<StateKey, usize> = FxHashMap::default();
    let k0 = lattice.key(start_pos, start_vel);
    best.insert(k0, 0);
    let mut open = BinaryHeap::new();
    open.push(OpenEntry {
        f: 0.0,
        h: 0.0,
        key: k0,
        node: 0,
    });
    let mut expansions = 0;
    while let Some(e) = open.pop() {
        if best.get(&e.key) != Some(&e.node) {
            continue;
        }
        let (pos, vel, g) = (nodes[e.node].pos, nodes[e.node].vel, nodes[e.node].g);
        if goal_reached(&pos, &vel, goal, goal_tolerance, vel_tol) {
            let mut t = reconstruct(&nodes, e.node);
            t.cost = g;
            return Ok(Some(t));
        }
        if expansions >= budget {
            return Ok(None);
        }
        expansions += 1;
        for (prim, cost) in successors_from(&pos, &vel, &inputs, params, query) {
            let (p2, v2) = prim.end();
            let g2 = g + cost;
            let key = lattice.key(&p2, &v2);
            if best.get(&key).is_some_and(|&i| nodes[i].g <= g2) {
                continue;
            }
            let idx = nodes.len();
            nodes.push(Node {
                pos: p2,
                vel: v2,
                g: g2,
                parent: Some((e.node, prim)),
            });
            best.insert(key, idx);
            open.push(OpenEntry {
                f: g2,
                h: 0.0,
                key,
                node: idx,
            });
        }
    }
    Ok(None)
}
