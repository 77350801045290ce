//! Python bindings. Results come back as plain dicts and lists with the same
//! field names as the JSON reports of the command-line tool.

#![allow(clippy::useless_conversion)]

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use rdcontrol::optimal_control::{minimal_time as min_time, solve_terminal, OcpSpec, SolveOptions};
use rdcontrol::pde::{ramp, reference_dt, simulate as run_schedule};
use rdcontrol::phase_plane::{find_stationary_solutions_on_grid, ThresholdReport};
use rdcontrol::strategies::{staircase_to_theta, StaircaseConfig};
use rdcontrol::{ControlSchedule, Error, Field, ReactionModel};

create_exception!(pyrdcontrol, InfeasibleError, PyException);
create_exception!(pyrdcontrol, NumericalError, PyException);

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Infeasible { .. }
        | Error::PathInfeasible { .. }
        | Error::Timeout(_)
        | Error::CaptureRadius { .. }
        | Error::InfeasibleUpperBound(_) => InfeasibleError::new_err(msg),
        Error::StepFailure(_) | Error::Numerical(_) => NumericalError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

fn model(kind: &str, theta: f64) -> PyResult<ReactionModel> {
    match kind {
        "logistic" => Ok(ReactionModel::logistic()),
        "cubic" => ReactionModel::cubic(theta).map_err(to_py),
        other => Err(PyValueError::new_err(format!("unknown model {other:?}"))),
    }
}

fn to_object<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<PyObject> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import_bound("json")?.call_method1("loads", (text,))?.unbind())
}

fn initial(length: f64, n_x: usize, y0: Option<Vec<f64>>) -> PyResult<Field> {
    match y0 {
        None => Ok(ramp(length, n_x)),
        Some(v) if v.len() == n_x + 1 => Ok(Field::new(length, v)),
        Some(v) => Err(PyValueError::new_err(format!(
            "y0 has {} samples, expected n_x + 1 = {}",
            v.len(),
            n_x + 1
        ))),
    }
}

#[derive(Serialize)]
struct Simulation {
    times: Vec<f64>,
    x: Vec<f64>,
    states: Vec<Vec<f64>>,
    max_violation: f64,
}

/// Threshold lengths of the model.
#[pyfunction]
#[pyo3(signature = (model_kind="cubic", theta=1.0/3.0))]
fn thresholds(py: Python<'_>, model_kind: &str, theta: f64) -> PyResult<PyObject> {
    let m = model(model_kind, theta)?;
    let report = py.allow_threads(|| ThresholdReport::compute(&m)).map_err(to_py)?;
    to_object(py, &report)
}

/// Constant controls `u`, `v` from `y0` (default: the ramp `0.8 → 0.1`).
#[pyfunction]
#[pyo3(signature = (length, u, v, t_final, dt=None, n_x=200, y0=None, record_every=100, model_kind="cubic", theta=1.0/3.0))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    length: f64,
    u: f64,
    v: f64,
    t_final: f64,
    dt: Option<f64>,
    n_x: usize,
    y0: Option<Vec<f64>>,
    record_every: usize,
    model_kind: &str,
    theta: f64,
) -> PyResult<PyObject> {
    let m = model(model_kind, theta)?;
    let y0 = initial(length, n_x, y0)?;
    let dt = dt.unwrap_or_else(|| reference_dt(&m));
    if !(dt > 0.0 && t_final > 0.0) {
        return Err(PyValueError::new_err("dt and t_final must be positive"));
    }
    let steps = (t_final / dt).round().max(1.0) as usize;
    let schedule = ControlSchedule::constant(t_final / steps as f64, steps, u, v).map_err(to_py)?;
    let traj = py
        .allow_threads(|| run_schedule(&m, &y0, &schedule, record_every))
        .map_err(to_py)?;
    let out = Simulation {
        x: y0.grid(),
        times: traj.times,
        states: traj.states,
        max_violation: traj.max_violation,
    };
    to_object(py, &out)
}

#[derive(Serialize)]
struct StaircaseResult<'a> {
    #[serde(flatten)]
    outcome: &'a rdcontrol::strategies::StrategyOutcome,
    schedule: &'a ControlSchedule,
    final_state: &'a [f64],
}

/// Staircase strategy to `θ`; `config` holds overrides of the strategy
/// parameters by name.
#[pyfunction]
#[pyo3(signature = (length, config=None, y0=None, theta=1.0/3.0))]
fn staircase(
    py: Python<'_>,
    length: f64,
    config: Option<&Bound<'_, PyAny>>,
    y0: Option<Vec<f64>>,
    theta: f64,
) -> PyResult<PyObject> {
    let m = model("cubic", theta)?;
    let cfg: StaircaseConfig = match config {
        None => StaircaseConfig::default(),
        Some(c) => {
            let text: String = py.import_bound("json")?.call_method1("dumps", (c,))?.extract()?;
            serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?
        }
    };
    let y0 = initial(length, cfg.n_x, y0)?;
    let outcome = py.allow_threads(|| staircase_to_theta(&m, &y0, &cfg)).map_err(to_py)?;
    let last = outcome.trajectory.states.last().map(Vec::as_slice).unwrap_or(&[]);
    to_object(
        py,
        &StaircaseResult {
            outcome: &outcome,
            schedule: &outcome.schedule,
            final_state: last,
        },
    )
}

#[allow(clippy::too_many_arguments)]
fn ocp(
    m: &ReactionModel,
    length: f64,
    horizon: f64,
    n_x: usize,
    n_t: usize,
    init_level: Option<f64>,
    tie: bool,
    y0: Option<Vec<f64>>,
) -> PyResult<OcpSpec> {
    let mut spec = OcpSpec::new(m, length, horizon, n_x, n_t)
        .map_err(to_py)?
        .tied(tie);
    if let Some(v) = y0 {
        spec = spec.with_y0(initial(length, n_x, Some(v))?).map_err(to_py)?;
    }
    if let Some(level) = init_level {
        spec.init_level = level;
    }
    Ok(spec)
}

/// Minimise `½‖y(T) - θ‖²` over controls in `[0,1]`.
#[pyfunction]
#[pyo3(signature = (length, horizon=20.0, n_x=60, n_t=400, max_iters=2000, tol_grad=1e-10, init_level=None, tie=false, y0=None, theta=1.0/3.0))]
#[allow(clippy::too_many_arguments)]
fn optimize(
    py: Python<'_>,
    length: f64,
    horizon: f64,
    n_x: usize,
    n_t: usize,
    max_iters: usize,
    tol_grad: f64,
    init_level: Option<f64>,
    tie: bool,
    y0: Option<Vec<f64>>,
    theta: f64,
) -> PyResult<PyObject> {
    let m = model("cubic", theta)?;
    let spec = ocp(&m, length, horizon, n_x, n_t, init_level, tie, y0)?;
    let r = py
        .allow_threads(|| solve_terminal(&spec, &spec.initial_schedule(), max_iters, tol_grad))
        .map_err(to_py)?;
    to_object(py, &r)
}

/// Smallest horizon in `[t_lo, t_hi]` at which `‖y(T) - θ‖∞ ≤ feas_tol`.
#[pyfunction]
#[pyo3(signature = (length, t_lo=0.0, t_hi=20.0, feas_tol=2e-2, n_x=60, n_t=400, max_bisect=40, max_iters=3000, tol_grad=1e-14, init_level=Some(0.0), tie=false, theta=1.0/3.0))]
#[allow(clippy::too_many_arguments)]
fn minimal_time(
    py: Python<'_>,
    length: f64,
    t_lo: f64,
    t_hi: f64,
    feas_tol: f64,
    n_x: usize,
    n_t: usize,
    max_bisect: usize,
    max_iters: usize,
    tol_grad: f64,
    init_level: Option<f64>,
    tie: bool,
    theta: f64,
) -> PyResult<PyObject> {
    let m = model("cubic", theta)?;
    let spec = ocp(&m, length, t_hi, n_x, n_t, init_level, tie, None)?;
    let opts = SolveOptions {
        max_iters,
        tol_grad,
        target_error: None,
    };
    let r = py
        .allow_threads(|| min_time(&spec, t_lo, t_hi, feas_tol, max_bisect, opts))
        .map_err(to_py)?;
    to_object(py, &r)
}

/// Stationary solutions with `w(0) = a`, `w(L) = b`.
#[pyfunction]
#[pyo3(signature = (length, a=0.0, b=0.0, n=256, model_kind="cubic", theta=1.0/3.0))]
fn stationary(
    py: Python<'_>,
    length: f64,
    a: f64,
    b: f64,
    n: usize,
    model_kind: &str,
    theta: f64,
) -> PyResult<PyObject> {
    let m = model(model_kind, theta)?;
    let sols = py
        .allow_threads(|| find_stationary_solutions_on_grid(&m, a, b, length, n))
        .map_err(to_py)?;
    to_object(py, &sols)
}

#[pymodule]
fn pyrdcontrol(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("InfeasibleError", m.py().get_type_bound::<InfeasibleError>())?;
    m.add("NumericalError", m.py().get_type_bound::<NumericalError>())?;
    m.add_function(wrap_pyfunction!(thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(staircase, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(minimal_time, m)?)?;
    m.add_function(wrap_pyfunction!(stationary, m)?)?;
    Ok(())
}
