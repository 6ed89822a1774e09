//! Smooth polynomial refit of a primitive trajectory.
//!
//! Each axis is fitted independently with a piecewise polynomial that passes
//! through the primitive joint positions at the primitive joint times, meets
//! full boundary states at both ends, is continuous through the configured
//! derivative order at every joint, and minimises the integrated square of the
//! chosen derivative. The resulting equality-constrained quadratic program is
//! solved through its KKT system; all three axes share one factorization.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::PrimitiveTrajectory;
use crate::poly::{falling_factorial, PolyError, PolySegment, PolyTrajectory};
use crate::state::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RefineError {
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("singular system for {segments} segments (durations {durations:?})")]
    Singular { segments: usize, durations: Vec<f64> },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineParams {
    pub order: usize,
    pub continuity: usize,
    pub minimize: usize,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self {
            order: 7,
            continuity: 3,
            minimize: 4,
        }
    }
}

impl RefineParams {
    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut errs = Vec::new();
        if self.order < 2 * self.continuity + 1 {
            errs.push(format!("{prefix}.order: must be at least 2·continuity + 1"));
        }
        if self.minimize > self.order {
            errs.push(format!("{prefix}.minimize: must not exceed order"));
        }
        if self.minimize == 0 {
            errs.push(format!("{prefix}.minimize: must be at least 1"));
        }
        errs
    }
}

/// Position and the first three derivatives at a trajectory end.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub jerk: Vec3,
}

impl BoundaryState {
    pub fn at_rest(position: Vec3) -> Self {
        Self {
            position,
            ..Default::default()
        }
    }

    /// Derivative `r`; orders above jerk are zero.
    pub fn derivative(&self, r: usize) -> Vec3 {
        match r {
            0 => self.position,
            1 => self.velocity,
            2 => self.acceleration,
            3 => self.jerk,
            _ => Vec3::zeros(),
        }
    }
}

/// Joint positions and cumulative times of a primitive trajectory.
pub fn extract_waypoints(traj: &PrimitiveTrajectory) -> Result<(Vec<Vec3>, Vec<f64>), RefineError> {
    let first = traj.primitives.first().ok_or(RefineError::Empty("primitive trajectory"))?;
    let mut positions = vec![first.start_position];
    let mut times = vec![0.0];
    let mut t = 0.0;
    for p in &traj.primitives {
        t += p.duration;
        positions.push(p.end().0);
        times.push(t);
    }
    Ok((positions, times))
}

/// Linear system shared by every axis: the KKT matrix and the layout needed to
/// build right-hand sides.
struct Kkt {
    matrix: DMatrix<f64>,
    durations: Vec<f64>,
    n_coeffs: usize,
    n_rows: usize,
}

impl Kkt {
    fn build(durations: &[f64], params: &RefineParams) -> Self {
        let n = durations.len();
        let m = params.order + 1;
        let k = params.continuity;
        let q = params.minimize;
        let unknowns = n * m;
        let rows = 2 * n + 2 * k + k * (n - 1);
        let size = unknowns + rows;
        let mut a = DMatrix::<f64>::zeros(size, size);

        // Hessian in normalised time: ∫₀¹ (d^q/dt^q p)² dt · T
        for (i, &t) in durations.iter().enumerate() {
            let scale = t.powi(1 - 2 * q as i32);
            for j in q..m {
                for l in q..m {
                    let v = falling_factorial(j, q) * falling_factorial(l, q) / (j + l + 1 - 2 * q) as f64;
                    a[(i * m + j, i * m + l)] = 2.0 * scale * v;
                }
            }
        }

        // constraint rows; derivative rows are expressed in normalised time
        // (multiplied through by T^r) to keep entries O(1)
        let mut row = unknowns;
        let put = |a: &mut DMatrix<f64>, row: usize, col: usize, v: f64| {
            a[(row, col)] = v;
            a[(col, row)] = v;
        };
        for i in 0..n {
            put(&mut a, row, i * m, 1.0);
            row += 1;
            for j in 0..m {
                put(&mut a, row, i * m + j, 1.0);
            }
            row += 1;
        }
        for r in 1..=k {
            put(&mut a, row, r, falling_factorial(r, r));
            row += 1;
            let last = n - 1;
            for j in r..m {
                put(&mut a, row, last * m + j, falling_factorial(j, r));
            }
            row += 1;
        }
        for i in 0..n.saturating_sub(1) {
            let ratio = durations[i] / durations[i + 1];
            for r in 1..=k {
                for j in r..m {
                    put(&mut a, row, i * m + j, falling_factorial(j, r));
                }
                put(&mut a, row, (i + 1) * m + r, -falling_factorial(r, r) * ratio.powi(r as i32));
                row += 1;
            }
        }
        debug_assert_eq!(row, size);
        Self {
            matrix: a,
            durations: durations.to_vec(),
            n_coeffs: unknowns,
            n_rows: rows,
        }
    }

    fn rhs(&self, positions: &[Vec3], start: &BoundaryState, end: &BoundaryState, k: usize) -> DMatrix<f64> {
        let n = self.durations.len();
        let mut b = DMatrix::<f64>::zeros(self.n_coeffs + self.n_rows, 3);
        let mut row = self.n_coeffs;
        for i in 0..n {
            for ax in 0..3 {
                b[(row, ax)] = positions[i][ax];
                b[(row + 1, ax)] = positions[i + 1][ax];
            }
            row += 2;
        }
        let (t0, t1) = (self.durations[0], self.durations[n - 1]);
        for r in 1..=k {
            let s = start.derivative(r) * t0.powi(r as i32);
            let e = end.derivative(r) * t1.powi(r as i32);
            for ax in 0..3 {
                b[(row, ax)] = s[ax];
                b[(row + 1, ax)] = e[ax];
            }
            row += 2;
        }
        b
    }
}

/// 1-norm condition number estimate; only computed when debug logging is on.
fn condition_1norm(a: &DMatrix<f64>) -> Option<f64> {
    let inv = a.clone().try_inverse()?;
    let norm1 = |m: &DMatrix<f64>| {
        m.column_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    Some(norm1(a) * norm1(&inv))
}

/// Minimum-derivative piecewise polynomial through `positions` at `times`.
pub fn fit_polynomial(
    positions: &[Vec3],
    times: &[f64],
    start: &BoundaryState,
    end: &BoundaryState,
    params: &RefineParams,
) -> Result<PolyTrajectory, RefineError> {
    let errs = params.validate("refine");
    if !errs.is_empty() {
        return Err(RefineError::Invalid(errs.join("; ")));
    }
    if positions.len() < 2 {
        return Err(RefineError::Empty("need at least two waypoints"));
    }
    if positions.len() != times.len() {
        return Err(RefineError::Invalid(format!(
            "{} positions but {} times",
            positions.len(),
            times.len()
        )));
    }
    if times.iter().any(|t| !t.is_finite()) || positions.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(RefineError::Invalid("non-finite waypoint".into()));
    }
    let durations: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(i) = durations.iter().position(|d| !(*d > 0.0)) {
        return Err(RefineError::Invalid(format!("times not strictly increasing at index {}", i + 1)));
    }
    let tol = 1e-9 * (1.0 + positions[0].norm().max(positions[positions.len() - 1].norm()));
    if (start.position - positions[0]).norm() > tol || (end.position - positions[positions.len() - 1]).norm() > tol {
        return Err(RefineError::Invalid("boundary positions disagree with the end waypoints".into()));
    }

    let kkt = Kkt::build(&durations, params);
    if log::log_enabled!(log::Level::Debug) {
        if let Some(c) = condition_1norm(&kkt.matrix) {
            log::debug!("refine: {} segments, KKT condition number {c:.3e}", durations.len());
        }
    }
    let singular = || RefineError::Singular {
        segments: durations.len(),
        durations: durations.clone(),
    };
    let b = kkt.rhs(positions, start, end, params.continuity);
    let sol = kkt.matrix.clone().lu().solve(&b).ok_or_else(singular)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(singular());
    }

    let m = params.order + 1;
    let segments = durations
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            // undo the time normalisation: c_j (s = τ/T) → c_j / T^j
            let axis = |ax: usize| -> Vec<f64> { (0..m).map(|j| sol[(i * m + j, ax)] / t.powi(j as i32)).collect() };
            PolySegment::new([axis(0), axis(1), axis(2)], t)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PolyTrajectory::new(segments, times[0])?)
}

/// Refit a primitive trajectory, taking the start derivatives from `start`
/// and ending in the primitive end state with zero acceleration and jerk.
pub fn refine_trajectory(
    traj: &PrimitiveTrajectory,
    start: &BoundaryState,
    params: &RefineParams,
) -> Result<PolyTrajectory, RefineError> {
    let (positions, times) = extract_waypoints(traj)?;
    let (end_pos, end_vel) = traj.end_state().ok_or(RefineError::Empty("primitive trajectory"))?;
    let end = BoundaryState {
        position: end_pos,
        velocity: end_vel,
        ..Default::default()
    };
    let start = BoundaryState {
        position: positions[0],
        ..*start
    };
    fit_polynomial(&positions, &times, &start, &end, params)
}

/// Largest positional gap between the two trajectories sampled every `dt`
/// (plus the common end time).
pub fn max_deviation(prim: &PrimitiveTrajectory, poly: &PolyTrajectory, dt: f64) -> Result<f64, RefineError> {
    if (prim.duration - poly.duration()).abs() > 1e-9 {
        return Err(RefineError::Invalid(format!(
            "duration mismatch: primitive {} vs polynomial {}",
            prim.duration,
            poly.duration()
        )));
    }
    if !(dt > 0.0) {
        return Err(RefineError::Invalid("dt must be positive".into()));
    }
    let mut worst: f64 = 0.0;
    for t in crate::planner::sample_times(prim.duration, dt) {
        let t = t.min(poly.duration());
        let d = (prim.sample(t).0 - poly.eval(t, 0)?).norm();
        worst = worst.max(d);
    }
    Ok(worst)
}
