//! Python bindings: scenarios, one-shot planning, closed-loop missions, the
//! controller and the minimum-derivative fit.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use kinonav::cli::{mission_exit_code, plan_once, PlanReport};
use kinonav::control::{control_step as step, ControlParams};
use kinonav::planner::PlanError;
use kinonav::poly::PolyTrajectory;
use kinonav::refine::{fit_polynomial, BoundaryState, RefineParams};
use kinonav::scenario::{load_scenario, Scenario, ScenarioError};
use kinonav::sim::{run_mission as run, MissionLog};
use kinonav::state::{FlatReference, RobotState, Vec3};
use kinonav::verify::metrics;

create_exception!(kinonav_py, NoPathError, PyRuntimeError);

fn scenario_err(e: ScenarioError) -> PyErr {
    match e {
        ScenarioError::Io(e) => PyIOError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

#[pyclass(name = "Scenario", from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        load_scenario(path.as_ref()).map(|inner| Self { inner }).map_err(scenario_err)
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Scenario::from_toml_str(text).map(|inner| Self { inner }).map_err(scenario_err)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
        self.inner.noise.seed = None;
    }

    #[getter]
    fn drag_comp(&self) -> bool {
        self.inner.control.drag_comp
    }

    #[setter]
    fn set_drag_comp(&mut self, on: bool) {
        self.inner.control.drag_comp = on;
    }

    #[getter]
    fn start(&self) -> [f64; 3] {
        arr(&self.inner.start_position())
    }

    #[getter]
    fn goal(&self) -> [f64; 3] {
        arr(&self.inner.goal_position())
    }

    fn __repr__(&self) -> String {
        format!("Scenario({:?})", self.inner.name)
    }
}

#[pyclass(name = "Plan")]
struct PyPlan {
    report: PlanReport,
}

#[pymethods]
impl PyPlan {
    #[getter]
    fn cost(&self) -> f64 {
        self.report.trajectory.cost
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.report.trajectory.duration
    }

    #[getter]
    fn max_deviation(&self) -> f64 {
        self.report.max_deviation
    }

    #[getter]
    fn refined_collision_free(&self) -> bool {
        self.report.refined_collision_free
    }

    fn metrics(&self) -> BTreeMap<String, f64> {
        [
            "cost",
            "duration",
            "expansions",
            "primitives",
            "max_deviation",
            "refined_collision_free",
            "occupied_voxels",
            "start_vx",
            "start_vy",
            "start_vz",
        ]
        .into_iter()
        .filter_map(|k| Some((k.to_string(), self.report.metric(k)?)))
        .collect()
    }

    /// (t, position, velocity) of the primitive trajectory every `dt` seconds.
    #[pyo3(signature = (dt = 0.1))]
    fn samples(&self, dt: f64) -> PyResult<Vec<(f64, [f64; 3], [f64; 3])>> {
        if !(dt > 0.0) {
            return Err(PyValueError::new_err("dt must be positive"));
        }
        let traj = &self.report.trajectory;
        Ok(kinonav::planner::sample_times(traj.duration, dt)
            .into_iter()
            .map(|t| {
                let (p, v, _) = traj.sample(t);
                (t, arr(&p), arr(&v))
            })
            .collect())
    }

    /// Refined position at `t`, or None when refinement failed.
    fn refined_position(&self, t: f64) -> PyResult<Option<[f64; 3]>> {
        let Some(poly) = &self.report.refined else { return Ok(None) };
        poly.eval(t, 0)
            .map(|p| Some(arr(&p)))
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

#[pyclass(name = "Mission")]
struct PyMission {
    log: MissionLog,
}

#[pymethods]
impl PyMission {
    #[getter]
    fn outcome(&self) -> &'static str {
        self.log.outcome.as_str()
    }

    #[getter]
    fn exit_code(&self) -> i32 {
        mission_exit_code(self.log.outcome)
    }

    fn summary(&self) -> BTreeMap<String, f64> {
        let s = self.log.summary();
        [
            "final_time",
            "final_goal_distance",
            "max_speed",
            "max_tracking_error",
            "path_length",
            "plans",
            "plan_failures",
            "emergency_stops",
            "refine_fallbacks",
            "max_swap_pos_jump",
            "max_swap_vel_jump",
            "max_deviation",
        ]
        .into_iter()
        .filter_map(|k| Some((k.to_string(), s.metric(k)?)))
        .collect()
    }

    fn control_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.log.write_control_csv(&mut buf).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(String::from_utf8_lossy(&buf).into_owned())
    }

    fn events_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.log.write_events_csv(&mut buf).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(String::from_utf8_lossy(&buf).into_owned())
    }

    /// (t, true position) of every control record.
    fn positions(&self) -> Vec<(f64, [f64; 3])> {
        self.log.records.iter().map(|r| (r.t, arr(&r.true_pos))).collect()
    }
}

#[pyclass(name = "Polynomial")]
struct PyPolynomial {
    inner: PolyTrajectory,
}

#[pymethods]
impl PyPolynomial {
    #[getter]
    fn duration(&self) -> f64 {
        self.inner.duration()
    }

    #[pyo3(signature = (t, deriv = 0))]
    fn eval(&self, t: f64, deriv: usize) -> PyResult<[f64; 3]> {
        self.inner
            .eval(t, deriv)
            .map(|v| arr(&v))
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

/// Map from the start pose, plan once and refine.
#[pyfunction]
fn plan(py: Python<'_>, scenario: &PyScenario) -> PyResult<PyPlan> {
    let sc = scenario.inner.clone();
    match py.detach(move || plan_once(&sc)) {
        Ok(report) => Ok(PyPlan { report }),
        Err(PlanError::Invalid(e)) => Err(PyValueError::new_err(e)),
        Err(e) => Err(NoPathError::new_err(e.to_string())),
    }
}

/// Fly the closed-loop mission.
#[pyfunction]
fn run_mission(py: Python<'_>, scenario: &PyScenario) -> PyResult<PyMission> {
    let sc = scenario.inner.clone();
    py.detach(move || run(&sc))
        .map(|log| PyMission { log })
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// One controller evaluation with default gains and a level start attitude.
/// Returns (thrust, commanded rotation rows).
#[pyfunction]
#[pyo3(signature = (position, velocity, ref_position, ref_velocity, ref_acceleration = [0.0; 3], yaw = 0.0, drag_comp = true))]
fn control_step(
    position: [f64; 3],
    velocity: [f64; 3],
    ref_position: [f64; 3],
    ref_velocity: [f64; 3],
    ref_acceleration: [f64; 3],
    yaw: f64,
    drag_comp: bool,
) -> PyResult<(f64, [[f64; 3]; 3])> {
    let state = RobotState {
        velocity: v3(velocity),
        ..RobotState::at_rest(v3(position))
    };
    let reference = FlatReference {
        velocity: v3(ref_velocity),
        acceleration: v3(ref_acceleration),
        ..FlatReference::hold(v3(ref_position), yaw)
    };
    let params = ControlParams {
        drag_comp,
        ..ControlParams::default()
    };
    let cmd = step(&state, &reference, &params).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let m = cmd.orientation.matrix();
    let rows = [0, 1, 2].map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]]);
    Ok((cmd.thrust, rows))
}

/// Minimum-snap, C³ degree-7 fit through waypoints, at rest at both ends.
#[pyfunction]
fn fit(positions: Vec<[f64; 3]>, times: Vec<f64>) -> PyResult<PyPolynomial> {
    let pts: Vec<Vec3> = positions.into_iter().map(v3).collect();
    let (Some(first), Some(last)) = (pts.first(), pts.last()) else {
        return Err(PyValueError::new_err("need at least two waypoints"));
    };
    fit_polynomial(
        &pts,
        &times,
        &BoundaryState::at_rest(*first),
        &BoundaryState::at_rest(*last),
        &RefineParams::default(),
    )
    .map(|inner| PyPolynomial { inner })
    .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Steady-state lag of the uncompensated controller at `speed` with default gains.
#[pyfunction]
fn predicted_lag(speed: f64) -> f64 {
    metrics::predicted_lag(&ControlParams::default(), speed)
}

/// Fastest level cruise under the thrust limit `f_max` with default gains.
#[pyfunction]
fn saturation_speed(f_max: f64) -> f64 {
    metrics::saturation_speed(&ControlParams::default(), f_max)
}

#[pymodule]
fn kinonav_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyPlan>()?;
    m.add_class::<PyMission>()?;
    m.add_class::<PyPolynomial>()?;
    m.add("NoPathError", m.py().get_type::<NoPathError>())?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(run_mission, m)?)?;
    m.add_function(wrap_pyfunction!(control_step, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(predicted_lag, m)?)?;
    m.add_function(wrap_pyfunction!(saturation_speed, m)?)?;
    Ok(())
}
