//! Constructive control strategies: static controls, local steering by a
//! terminal-cost solve, and the three-phase staircase to `θ`:
//!
//! 1. hold `u = v = ε` until the state is within `η` of the attracting steady
//!    state `y_init` (inside the homoclinic region);
//! 2. steer onto `y_init`;
//! 3. walk a path of steady states from `y_init` to `θ`, holding each
//!    state's boundary values for a dwell `τ` and steering again whenever the
//!    state drifts more than `η/2` from the path.
//!
//! Exact local controllability is replaced by a finite-horizon optimization,
//! so "reach θ" means "reach θ within `tol_final`".

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimal_control::{solve_terminal_with, OcpSpec, SolveOptions};
use crate::pde::{detect_convergence, simulate, ControlSchedule, Field, Scheme, Stepper, Trajectory};
use crate::phase_plane::{
    build_path_to_theta, find_stationary_solutions_on_grid, in_gamma, l_a, l_star, l_theta,
    SteadyState,
};
use crate::reaction::ReactionModel;

/// Largest allowed distance between the simulated and the shooting `y_init`.
pub const Y_INIT_AGREEMENT: f64 = 1e-4;

/// Consecutive path states are at most this fraction of `η` apart, so that a
/// tracking error below `η/2` plus one path step stays inside the capture
/// radius.
pub const PATH_GAP_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaircaseConfig {
    /// Boundary value of the static first phase, in `(0, θ)`.
    pub epsilon: f64,
    /// Capture radius of local steering.
    pub eta: f64,
    /// Dwell per path step.
    pub tau: f64,
    /// Success threshold on `‖y(T) - θ‖∞`.
    pub tol_final: f64,
    /// Initial path resolution (refined until steps are `η/4` apart).
    pub n_steps: usize,
    /// Steering box half-width is `c_box · η`.
    pub c_box: f64,
    pub tie_controls: bool,
    pub n_x: usize,
    pub dt: f64,
    /// Phase-1 time limit.
    pub t_max: f64,
    pub steer_iters: usize,
    /// Steering stops once `‖y - target‖∞` falls below this.
    pub steer_tol: f64,
    /// Run past the feasibility gate and report failure instead of an error.
    pub override_feasibility: bool,
    pub record_every: usize,
}

impl Default for StaircaseConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.02,
            eta: 0.01,
            tau: 1.0,
            tol_final: 1e-2,
            n_steps: 64,
            c_box: 5.0,
            tie_controls: false,
            n_x: 100,
            dt: 0.01,
            t_max: 500.0,
            steer_iters: 300,
            steer_tol: 1e-5,
            override_feasibility: false,
            record_every: 10,
        }
    }
}

impl StaircaseConfig {
    pub fn validate(&self, theta: f64) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        if !(self.epsilon > 0.0 && self.epsilon < theta) {
            return bad(format!("epsilon {} outside (0, θ = {theta})", self.epsilon));
        }
        if !(self.eta > 0.0) || !(self.tol_final > 0.0) || !(self.tau > 0.0) {
            return bad("eta, tau and tol_final must be positive".into());
        }
        if !(self.dt > 0.0) || self.n_x < 16 || self.n_steps == 0 {
            return bad("need dt > 0, n_x >= 16 and n_steps >= 1".into());
        }
        if !(self.c_box > 0.0) {
            return bad(format!("c_box must be positive, got {}", self.c_box));
        }
        Ok(())
    }

    fn steer_budget(&self) -> SteerBudget {
        SteerBudget {
            eta: self.eta,
            c_box: self.c_box,
            dt: self.dt,
            max_iters: self.steer_iters,
            tol: self.steer_tol,
            tie_controls: self.tie_controls,
        }
    }
}

/// Result of a strategy run.
#[derive(Debug, Clone, Serialize)]
pub struct StrategyOutcome {
    pub success: bool,
    #[serde(skip)]
    pub schedule: ControlSchedule,
    /// `(t₀, t₀ + t_loc, T)`: end of the static phase, end of the first
    /// steering, end of the run.
    pub phase_times: (f64, f64, f64),
    /// `‖y(T) - target‖∞`.
    pub final_error: f64,
    pub final_residual: f64,
    /// `‖y - w_s‖∞` at the end of each path step.
    pub tracking_errors: Vec<f64>,
    pub steer_corrections: usize,
    /// Effective `ε` after automatic halving.
    pub epsilon: Option<f64>,
    /// Whether `L` lies below the threshold relevant to the target.
    pub below_threshold: Option<bool>,
    pub failure_reason: Option<String>,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

/// Simulation state that accumulates the controls it was driven with.
struct Runner<'a> {
    stepper: Stepper<'a, ReactionModel>,
    y: Vec<f64>,
    length: f64,
    schedule: ControlSchedule,
}

impl<'a> Runner<'a> {
    fn new(model: &'a ReactionModel, y0: &Field, dt: f64) -> Result<Self> {
        Ok(Self {
            stepper: Stepper::new(model, y0.length, y0.n_x(), dt, Scheme::default())?,
            y: y0.values.clone(),
            length: y0.length,
            schedule: ControlSchedule {
                dt,
                u: Vec::new(),
                v: Vec::new(),
            },
        })
    }

    fn time(&self) -> f64 {
        self.schedule.horizon()
    }

    fn field(&self) -> Field {
        Field::new(self.length, self.y.clone())
    }

    fn distance(&self, target: &[f64]) -> f64 {
        self.y
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn step(&mut self, u: f64, v: f64) -> Result<()> {
        self.stepper.step_in_place(&mut self.y, u, v)?;
        self.schedule.u.push(u);
        self.schedule.v.push(v);
        Ok(())
    }

    fn hold(&mut self, u: f64, v: f64, duration: f64) -> Result<()> {
        let n = (duration / self.schedule.dt).round() as usize;
        for _ in 0..n {
            self.step(u, v)?;
        }
        Ok(())
    }

    fn apply(&mut self, s: &ControlSchedule) -> Result<()> {
        for k in 0..s.n_steps() {
            self.step(s.u[k], s.v[k])?;
        }
        Ok(())
    }
}

fn record(model: &ReactionModel, y0: &Field, schedule: &ControlSchedule, every: usize) -> Result<Trajectory> {
    simulate(model, y0, schedule, every)
}

/// Constant controls `u = v = a` over `[0, t_final]`.
pub fn static_strategy(
    model: &ReactionModel,
    y0: &Field,
    a: f64,
    t_final: f64,
    dt: f64,
    tol_final: f64,
) -> Result<StrategyOutcome> {
    let theta = model.theta();
    let below_threshold = if a == 0.0 {
        Some(y0.length < l_star(model)?.value)
    } else if a == 1.0 {
        Some(true)
    } else if Some(a) == theta {
        Some(y0.length < l_theta(model)?.value)
    } else {
        return Err(Error::Domain(format!(
            "static target {a} is not one of 0, θ, 1 for this model"
        )));
    };
    let n = (t_final / dt).round() as usize;
    let schedule = ControlSchedule::constant(dt, n, a, a)?;
    let every = (n / 200).max(1);
    let trajectory = record(model, y0, &schedule, every)?;
    let last = trajectory.last();
    let final_error = last.distance_to_constant(a);
    Ok(StrategyOutcome {
        success: final_error <= tol_final,
        phase_times: (t_final, t_final, t_final),
        final_error,
        final_residual: last.stationary_residual(model),
        tracking_errors: Vec::new(),
        steer_corrections: 0,
        epsilon: None,
        below_threshold,
        failure_reason: None,
        schedule,
        trajectory,
    })
}

/// Parameters of [`local_steer`].
#[derive(Debug, Clone, Copy)]
pub struct SteerBudget {
    /// Capture radius: the starting distance may not exceed it.
    pub eta: f64,
    /// Controls stay within `c_box · eta` of the target's boundary values.
    pub c_box: f64,
    pub dt: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub tie_controls: bool,
}

impl Default for SteerBudget {
    fn default() -> Self {
        StaircaseConfig::default().steer_budget()
    }
}

/// Drive `y_now` towards the steady state `target` over `horizon` with
/// controls boxed around the target's boundary values. Returns the controls
/// and the achieved `‖y(horizon) - target‖∞`.
pub fn local_steer(
    model: &ReactionModel,
    y_now: &Field,
    target: &SteadyState,
    horizon: f64,
    budget: &SteerBudget,
) -> Result<(ControlSchedule, f64)> {
    if target.values.len() != y_now.values.len() {
        return Err(Error::DimensionMismatch(format!(
            "target has {} samples, state has {}",
            target.values.len(),
            y_now.values.len()
        )));
    }
    let distance = y_now.max_distance(&target.values);
    if distance > budget.eta {
        return Err(Error::CaptureRadius {
            distance,
            radius: budget.eta,
        });
    }
    if distance == 0.0 {
        return Ok((ControlSchedule::new(budget.dt, Vec::new(), Vec::new())?, 0.0));
    }
    let n_t = ((horizon / budget.dt).round() as usize).max(16);
    let mut spec = OcpSpec::new(model, y_now.length, horizon, y_now.n_x(), n_t)?
        .with_y0(y_now.clone())?
        .with_target(Field::new(y_now.length, target.values.clone()))?
        .tied(budget.tie_controls);
    let (ub, vb) = (target.left_control, target.right_control);
    let half = budget.c_box * budget.eta;
    spec.u_bounds = ((ub - half).max(0.0), (ub + half).min(1.0));
    spec.v_bounds = ((vb - half).max(0.0), (vb + half).min(1.0));
    let init = ControlSchedule {
        dt: spec.dt(),
        u: vec![ub.clamp(spec.u_bounds.0, spec.u_bounds.1); n_t],
        v: vec![vb.clamp(spec.v_bounds.0, spec.v_bounds.1); n_t],
    };
    let res = solve_terminal_with(
        &spec,
        &init,
        SolveOptions {
            max_iters: budget.max_iters,
            tol_grad: 1e-14,
            target_error: Some(budget.tol),
        },
    )?;
    Ok((res.schedule, res.final_error))
}

type YInitKey = (String, u64, u64, usize, u64);

fn y_init_cache() -> &'static Mutex<HashMap<YInitKey, Field>> {
    static CACHE: OnceLock<Mutex<HashMap<YInitKey, Field>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Long-run limit of `u = v = ε` started from `0`, on `n_x` intervals.
/// Cached per model, length, `ε`, grid and step.
pub fn simulated_y_init(model: &ReactionModel, length: f64, epsilon: f64, n_x: usize, dt: f64) -> Result<Field> {
    let key = (
        model.name().to_string(),
        length.to_bits(),
        epsilon.to_bits(),
        n_x,
        dt.to_bits(),
    );
    if let Some(f) = y_init_cache().lock().expect("cache lock").get(&key) {
        return Ok(f.clone());
    }
    let chunk = 20.0;
    let n = (chunk / dt).round() as usize;
    let schedule = ControlSchedule::constant(dt, n, epsilon, epsilon)?;
    let mut y = Field::constant(length, n_x, 0.0);
    let mut t = 0.0;
    let found = loop {
        let traj = simulate(model, &y, &schedule, (n / 20).max(1))?;
        if let Some(f) = detect_convergence(model, &traj, 5.0, 1e-11) {
            break f;
        }
        y = traj.last();
        t += chunk;
        if t > 4000.0 {
            return Err(Error::Timeout(t));
        }
    };
    y_init_cache()
        .lock()
        .expect("cache lock")
        .insert(key, found.clone());
    Ok(found)
}

/// The unique steady state with boundary values `ε` inside the homoclinic
/// region, by shooting.
pub fn shooting_y_init(model: &ReactionModel, length: f64, epsilon: f64, n_x: usize) -> Result<SteadyState> {
    let sols = find_stationary_solutions_on_grid(model, epsilon, epsilon, length, n_x)?;
    let mut inside = Vec::new();
    for s in sols {
        if in_gamma(model, s.init)? {
            inside.push(s);
        }
    }
    match inside.len() {
        1 => Ok(inside.pop().expect("one element")),
        0 => Err(Error::PathInfeasible {
            s: 0.0,
            reason: format!("no steady state with boundary values {epsilon} inside the homoclinic region"),
        }),
        k => Err(Error::Numerical(format!(
            "{k} steady states with boundary values {epsilon} inside the homoclinic region"
        ))),
    }
}

/// `ε` halved until `L < L^ε`.
fn effective_epsilon(model: &ReactionModel, length: f64, epsilon: f64) -> Result<f64> {
    let mut eps = epsilon;
    for _ in 0..20 {
        if length < l_a(model, eps)?.value {
            return Ok(eps);
        }
        eps *= 0.5;
    }
    Ok(eps)
}

struct Phases {
    t0: f64,
    t_loc: f64,
    tracking: Vec<f64>,
    corrections: usize,
}

fn run_staircase(
    model: &ReactionModel,
    runner: &mut Runner<'_>,
    length: f64,
    cfg: &StaircaseConfig,
    epsilon: f64,
    phases: &mut Phases,
) -> Result<()> {
    let budget = cfg.steer_budget();
    let y_init = simulated_y_init(model, length, epsilon, cfg.n_x, cfg.dt)?;
    let shot = shooting_y_init(model, length, epsilon, cfg.n_x)?;
    let mismatch = y_init.max_distance(&shot.values);
    if mismatch > Y_INIT_AGREEMENT {
        return Err(Error::Numerical(format!(
            "simulated and shooting y_init differ by {mismatch:e}"
        )));
    }

    // Phase 1
    while runner.distance(&y_init.values) > cfg.eta {
        if runner.time() >= cfg.t_max {
            return Err(Error::Timeout(runner.time()));
        }
        runner.step(epsilon, epsilon)?;
    }
    phases.t0 = runner.time();

    // Phase 2
    let (steer, _) = local_steer(model, &runner.field(), &shot, cfg.tau, &budget)?;
    runner.apply(&steer)?;
    phases.t_loc = runner.time() - phases.t0;

    // Phase 3
    let path = build_path_to_theta(model, &shot, length, cfg.n_steps, PATH_GAP_FRACTION * cfg.eta)?;
    for k in 1..path.len() {
        let w = &path.states[k];
        let (u, v) = path.controls[k];
        runner.hold(u, v, cfg.tau)?;
        let drift = runner.distance(&w.values);
        if drift > 0.5 * cfg.eta {
            let (steer, _) = local_steer(model, &runner.field(), w, cfg.tau, &budget)?;
            runner.apply(&steer)?;
            phases.corrections += 1;
        }
        phases.tracking.push(runner.distance(&w.values));
    }
    Ok(())
}

/// Three-phase staircase from `y0` to the constant `θ`.
pub fn staircase_to_theta(model: &ReactionModel, y0: &Field, cfg: &StaircaseConfig) -> Result<StrategyOutcome> {
    let theta = model.require_theta()?;
    cfg.validate(theta)?;
    if y0.n_x() != cfg.n_x {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} intervals, configuration asks for {}",
            y0.n_x(),
            cfg.n_x
        )));
    }
    let length = y0.length;
    let threshold = l_star(model)?.value;
    let feasible = length < threshold;
    if !feasible && !cfg.override_feasibility {
        return Err(Error::Infeasible { length, threshold });
    }
    let epsilon = if feasible {
        effective_epsilon(model, length, cfg.epsilon)?
    } else {
        cfg.epsilon
    };
    let mut runner = Runner::new(model, y0, cfg.dt)?;
    let mut phases = Phases {
        t0: 0.0,
        t_loc: 0.0,
        tracking: Vec::new(),
        corrections: 0,
    };
    let failure_reason = match run_staircase(model, &mut runner, length, cfg, epsilon, &mut phases) {
        Ok(()) => None,
        Err(e @ (Error::Timeout(_) | Error::PathInfeasible { .. } | Error::CaptureRadius { .. } | Error::Infeasible { .. }))
            if cfg.override_feasibility =>
        {
            Some(e.to_string())
        }
        Err(e) => return Err(e),
    };
    let last = runner.field();
    let final_error = last.distance_to_constant(theta);
    let final_residual = last.stationary_residual(model);
    let t_end = runner.time();
    let (t0, t_loc) = if failure_reason.is_some() && phases.t0 == 0.0 {
        (t_end, 0.0)
    } else {
        (phases.t0, phases.t_loc)
    };
    let schedule = runner.schedule;
    let trajectory = record(model, y0, &schedule, cfg.record_every)?;
    Ok(StrategyOutcome {
        success: failure_reason.is_none()
            && final_error <= cfg.tol_final
            && final_residual <= 10.0 * cfg.tol_final,
        phase_times: (t0, t0 + t_loc, t_end),
        final_error,
        final_residual,
        tracking_errors: phases.tracking,
        steer_corrections: phases.corrections,
        epsilon: Some(epsilon),
        below_threshold: Some(feasible),
        failure_reason,
        schedule,
        trajectory,
    })
}

/// First time at which `u = v = ε` brings `y0` within `eta` of `y_init`.
pub fn capture_time(
    model: &ReactionModel,
    y0: &Field,
    y_init: &Field,
    epsilon: f64,
    eta: f64,
    dt: f64,
    t_max: f64,
) -> Result<f64> {
    let mut runner = Runner::new(model, y0, dt)?;
    while runner.distance(&y_init.values) > eta {
        if runner.time() >= t_max {
            return Err(Error::Timeout(runner.time()));
        }
        runner.step(epsilon, epsilon)?;
    }
    Ok(runner.time())
}

/// Capture times of the extremal data and of random intermediate data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniformTimeReport {
    /// First time both extremal runs are within `η` of `y_init`.
    pub t_star: f64,
    pub probe_times: Vec<f64>,
}

pub fn uniform_time_probe(
    model: &ReactionModel,
    length: f64,
    cfg: &StaircaseConfig,
    n_probes: usize,
    seed: u64,
) -> Result<UniformTimeReport> {
    let theta = model.require_theta()?;
    cfg.validate(theta)?;
    let threshold = l_star(model)?.value;
    if length >= threshold {
        return Err(Error::Infeasible { length, threshold });
    }
    let epsilon = effective_epsilon(model, length, cfg.epsilon)?;
    let y_init = simulated_y_init(model, length, epsilon, cfg.n_x, cfg.dt)?;
    let mut low = Runner::new(model, &Field::constant(length, cfg.n_x, 0.0), cfg.dt)?;
    let mut high = Runner::new(model, &Field::constant(length, cfg.n_x, 1.0), cfg.dt)?;
    while low.distance(&y_init.values) > cfg.eta || high.distance(&y_init.values) > cfg.eta {
        if low.time() >= cfg.t_max {
            return Err(Error::Timeout(low.time()));
        }
        low.step(epsilon, epsilon)?;
        high.step(epsilon, epsilon)?;
    }
    let t_star = low.time();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe_times = Vec::with_capacity(n_probes);
    for _ in 0..n_probes {
        let values: Vec<f64> = (0..=cfg.n_x).map(|_| rng.gen::<f64>()).collect();
        let y0 = Field::new(length, values);
        probe_times.push(capture_time(model, &y0, &y_init, epsilon, cfg.eta, cfg.dt, cfg.t_max)?);
    }
    Ok(UniformTimeReport { t_star, probe_times })
}

/// Certified lower bound on the time any admissible control needs to reach
/// `θ` from `y0`: by comparison, the state stays above the `u = v = 0` run
/// and below the `u = v = 1` run, so it cannot equal `θ` before the former
/// is everywhere `≤ θ` and the latter everywhere `≥ θ`.
pub fn minimal_time_lower_bound_check(model: &ReactionModel, y0: &Field, dt: f64, t_max: f64) -> Result<f64> {
    let theta = model.require_theta()?;
    let first_time = |c: f64, done: &dyn Fn(&[f64]) -> bool| -> Result<f64> {
        let mut runner = Runner::new(model, y0, dt)?;
        while !done(&runner.y) {
            if runner.time() >= t_max {
                return Err(Error::Timeout(runner.time()));
            }
            runner.step(c, c)?;
        }
        Ok(runner.time())
    };
    let mut bound: f64 = 0.0;
    if y0.values.iter().any(|&v| v > theta) {
        bound = bound.max(first_time(0.0, &|y: &[f64]| y.iter().all(|&v| v <= theta))?);
    }
    if y0.values.iter().any(|&v| v < theta) {
        bound = bound.max(first_time(1.0, &|y: &[f64]| y.iter().all(|&v| v >= theta))?);
    }
    Ok(bound)
}
