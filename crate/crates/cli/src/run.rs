//! Subcommand drivers. Every artifact is a pure function of the config, so
//! repeated runs write byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use rdcontrol::io::{
    save_cost_history_csv, save_json, save_schedule_csv, save_trajectory_binary,
    save_trajectory_csv,
};
use rdcontrol::optimal_control::{forward, minimal_time, solve_terminal_with, OcpSpec, OptimResult, SolveOptions};
use rdcontrol::pde::{reference_dt, simulate_with, ControlSchedule, Trajectory};
use rdcontrol::phase_plane::{find_stationary_solutions_on_grid, ThresholdReport};
use rdcontrol::strategies::{
    minimal_time_lower_bound_check, staircase_to_theta, uniform_time_probe, StrategyOutcome,
    UniformTimeReport,
};
use rdcontrol::ReactionModel;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

const SIMULATE_N_X: usize = 200;
const OCP_N_X: usize = 60;

/// Whether the command reached its goal; failures map to exit code 3.
pub struct Report {
    pub success: bool,
    pub summary: String,
}

pub struct Context {
    pub cfg: ExperimentConfig,
    pub model: ReactionModel,
    pub out: PathBuf,
}

impl Context {
    pub fn new(cfg: ExperimentConfig, out: PathBuf) -> Result<Self, CliError> {
        let model = ReactionModel::from_spec(&cfg.model).map_err(|e| CliError::Config(e.to_string()))?;
        fs::create_dir_all(&out).map_err(|e| CliError::Config(format!("{}: {e}", out.display())))?;
        Ok(Self { cfg, model, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_trajectory(&self, traj: &Trajectory) -> Result<(), CliError> {
        if self.cfg.output.trajectory_csv {
            save_trajectory_csv(traj, &self.path("trajectory.csv"))?;
        }
        if self.cfg.output.binary {
            save_trajectory_binary(traj, &self.path("trajectory.rdtj"))?;
        }
        Ok(())
    }
}

fn snapshot_times(t_final: f64, requested: Option<&[f64]>) -> Vec<f64> {
    match requested {
        Some(t) => t.to_vec(),
        None => (0..=4).map(|k| k as f64 * t_final / 4.0).collect(),
    }
}

/// Long-format `t,x,y` rows at the recorded snapshots nearest to `times`.
fn save_plot_data(traj: &Trajectory, times: &[f64], path: &Path) -> Result<(), CliError> {
    let mut text = String::from("t,x,y\n");
    let n = traj.states[0].len() - 1;
    for &t in times {
        let i = traj.index_at(t);
        for (j, y) in traj.states[i].iter().enumerate() {
            let x = traj.length * j as f64 / n as f64;
            text.push_str(&format!("{},{},{}\n", traj.times[i], x, y));
        }
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn thresholds(ctx: &Context) -> Result<Report, CliError> {
    let report = ThresholdReport::compute(&ctx.model)?;
    save_json(&report, &ctx.path("thresholds.json"))?;
    Ok(Report {
        success: true,
        summary: serde_json::to_string_pretty(&report).expect("report serializes"),
    })
}

#[derive(Serialize)]
struct SimulateOutcome {
    length: f64,
    t_final: f64,
    dt: f64,
    u: f64,
    v: f64,
    /// `‖y(T) - u‖∞` when the controls are equal and constant.
    final_error: Option<f64>,
    success: Option<bool>,
    final_min: f64,
    final_max: f64,
    max_violation: f64,
    schedule_csv_path: String,
}

pub fn simulate(ctx: &Context) -> Result<Report, CliError> {
    let sc = &ctx.cfg.simulate;
    let n_x = ctx.cfg.domain.n_x.unwrap_or(SIMULATE_N_X);
    let y0 = ctx.cfg.domain.initial_field(&ctx.model, n_x)?;
    let (u, v) = (sc.u.resolve(&ctx.model)?, sc.v.resolve(&ctx.model)?);
    let dt = sc.dt.unwrap_or_else(|| reference_dt(&ctx.model));
    if !(dt > 0.0) || !(sc.t_final > 0.0) {
        return Err(CliError::Config("simulate needs dt > 0 and t_final > 0".into()));
    }
    let n = (sc.t_final / dt).round() as usize;
    let schedule = ControlSchedule::constant(dt, n, u, v)?;
    let traj = simulate_with(&ctx.model, &y0, &schedule, sc.record_every.max(1), sc.scheme.into())?;
    ctx.write_trajectory(&traj)?;
    save_schedule_csv(&schedule, &ctx.path("schedule.csv"))?;
    let times = snapshot_times(traj.final_time(), sc.snapshots.as_deref());
    save_plot_data(&traj, &times, &ctx.path("plot_data.csv"))?;
    let last = traj.last();
    let final_error = (u == v).then(|| last.distance_to_constant(u));
    let outcome = SimulateOutcome {
        length: y0.length,
        t_final: traj.final_time(),
        dt,
        u,
        v,
        final_error,
        success: final_error.map(|e| e <= sc.tol_final),
        final_min: last.min(),
        final_max: last.max(),
        max_violation: traj.max_violation,
        schedule_csv_path: "schedule.csv".into(),
    };
    save_json(&outcome, &ctx.path("outcome.json"))?;
    Ok(Report {
        success: outcome.success.unwrap_or(true),
        summary: match final_error {
            Some(e) => format!("L = {}, T = {}: ‖y(T) - {u:.4}‖∞ = {e:.3e}", y0.length, traj.final_time()),
            None => format!("L = {}, T = {}: y(T) in [{:.4}, {:.4}]", y0.length, traj.final_time(), last.min(), last.max()),
        },
    })
}

#[derive(Serialize)]
struct StaircaseReport<'a> {
    #[serde(flatten)]
    outcome: &'a StrategyOutcome,
    length: f64,
    schedule_csv_path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    uniform_time: Option<UniformTimeReport>,
}

pub fn staircase(ctx: &Context) -> Result<Report, CliError> {
    let mut sc = ctx.cfg.staircase.clone();
    if let Some(n) = ctx.cfg.domain.n_x {
        sc.n_x = n;
    }
    let y0 = ctx.cfg.domain.initial_field(&ctx.model, sc.n_x)?;
    let outcome = staircase_to_theta(&ctx.model, &y0, &sc)?;
    let uniform_time = if ctx.cfg.uniform.n_probes > 0 {
        Some(uniform_time_probe(&ctx.model, y0.length, &sc, ctx.cfg.uniform.n_probes, ctx.cfg.seed)?)
    } else {
        None
    };
    ctx.write_trajectory(&outcome.trajectory)?;
    save_schedule_csv(&outcome.schedule, &ctx.path("schedule.csv"))?;
    let times = snapshot_times(outcome.trajectory.final_time(), None);
    save_plot_data(&outcome.trajectory, &times, &ctx.path("plot_data.csv"))?;
    let report = StaircaseReport {
        outcome: &outcome,
        length: y0.length,
        schedule_csv_path: "schedule.csv".into(),
        uniform_time,
    };
    save_json(&report, &ctx.path("outcome.json"))?;
    let summary = match &outcome.failure_reason {
        Some(r) => format!("L = {}: failed ({r}), ‖y(T) - θ‖∞ = {:.3e}", y0.length, outcome.final_error),
        None => format!(
            "L = {}: reached θ within {:.3e} at T = {:.2} with {} corrections",
            y0.length, outcome.final_error, outcome.phase_times.2, outcome.steer_corrections
        ),
    };
    Ok(Report {
        success: outcome.success,
        summary,
    })
}

fn ocp_spec(ctx: &Context, horizon: f64, n_t: usize, init_level: Option<f64>, tie: bool) -> Result<OcpSpec, CliError> {
    let n_x = ctx.cfg.domain.n_x.unwrap_or(OCP_N_X);
    let y0 = ctx.cfg.domain.initial_field(&ctx.model, n_x)?;
    let mut spec = OcpSpec::new(&ctx.model, y0.length, horizon, n_x, n_t)
        .map_err(|e| CliError::Config(e.to_string()))?
        .with_y0(y0)?
        .tied(tie);
    if let Some(level) = init_level {
        if !(0.0..=1.0).contains(&level) {
            return Err(CliError::Config(format!("init_level {level} outside [0,1]")));
        }
        spec.init_level = level;
    }
    Ok(spec)
}

#[derive(Serialize)]
struct OptimizeOutcome<'a> {
    length: f64,
    horizon: f64,
    n_x: usize,
    n_t: usize,
    success: bool,
    final_error: f64,
    final_cost: f64,
    grad_norm_final: f64,
    iterations: usize,
    converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    minimal_time: Option<&'a MintimeSummary>,
    schedule_csv_path: String,
    cost_history_csv_path: String,
}

#[derive(Serialize)]
struct MintimeSummary {
    t_f: f64,
    feas_tol: f64,
    tie_controls: bool,
    /// Lower bound from the uncontrolled comparison runs.
    t_lower_bound: Option<f64>,
    probes: Vec<(f64, bool)>,
}

fn write_optimization(
    ctx: &Context,
    spec: &OcpSpec,
    res: &OptimResult,
    success: bool,
    mintime: Option<&MintimeSummary>,
) -> Result<(), CliError> {
    let (traj, _) = forward(spec, &res.schedule)?;
    ctx.write_trajectory(&traj)?;
    save_schedule_csv(&res.schedule, &ctx.path("schedule.csv"))?;
    save_cost_history_csv(&res.cost_history, &ctx.path("cost_history.csv"))?;
    save_plot_data(&traj, &snapshot_times(spec.horizon, None), &ctx.path("plot_data.csv"))?;
    let outcome = OptimizeOutcome {
        length: spec.length,
        horizon: spec.horizon,
        n_x: spec.n_x,
        n_t: spec.n_t,
        success,
        final_error: res.final_error,
        final_cost: res.final_cost,
        grad_norm_final: res.grad_norm_final,
        iterations: res.iterations,
        converged: res.converged,
        minimal_time: mintime,
        schedule_csv_path: "schedule.csv".into(),
        cost_history_csv_path: "cost_history.csv".into(),
    };
    save_json(&outcome, &ctx.path("outcome.json"))
        .map_err(CliError::from)
}

pub fn optimize(ctx: &Context) -> Result<Report, CliError> {
    let oc = &ctx.cfg.optimize;
    let mut spec = ocp_spec(ctx, oc.horizon, oc.n_t, oc.init_level, oc.tie_controls)?;
    spec.fixed_controls = oc.fixed_controls;
    let opts = SolveOptions {
        max_iters: oc.max_iters,
        tol_grad: oc.tol_grad,
        target_error: oc.target_error,
    };
    let res = solve_terminal_with(&spec, &spec.initial_schedule(), opts)?;
    let success = res.final_error <= oc.success_tol;
    write_optimization(ctx, &spec, &res, success, None)?;
    Ok(Report {
        success,
        summary: format!(
            "L = {}, T = {}: ‖y(T) - ŷ‖∞ = {:.3e} after {} iterations (cost {:.3e})",
            spec.length, spec.horizon, res.final_error, res.iterations, res.final_cost
        ),
    })
}

pub fn mintime(ctx: &Context) -> Result<Report, CliError> {
    let mc = &ctx.cfg.mintime;
    if !(mc.feas_tol > 0.0) {
        return Err(CliError::Config("mintime.feas_tol must be positive".into()));
    }
    let spec = ocp_spec(ctx, mc.t_hi, mc.n_t, mc.init_level, mc.tie_controls)?;
    let opts = SolveOptions {
        max_iters: mc.max_iters,
        tol_grad: mc.tol_grad,
        target_error: None,
    };
    let found = minimal_time(&spec, mc.t_lo, mc.t_hi, mc.feas_tol, mc.max_bisect, opts)?;
    let t_lower_bound = if ctx.model.is_bistable() {
        Some(minimal_time_lower_bound_check(&ctx.model, &spec.y0, 1e-2, 10.0 * mc.t_hi)?)
    } else {
        None
    };
    let summary = MintimeSummary {
        t_f: found.t_f,
        feas_tol: mc.feas_tol,
        tie_controls: mc.tie_controls,
        t_lower_bound,
        probes: found.probes.clone(),
    };
    let at_tf = spec.clone().with_horizon(found.t_f.max(1e-9));
    write_optimization(ctx, &at_tf, &found.result, true, Some(&summary))?;
    Ok(Report {
        success: true,
        summary: format!(
            "L = {}, {} control(s): t_f = {:.3} (‖y(t_f) - θ‖∞ = {:.2e} ≤ {})",
            spec.length,
            if mc.tie_controls { 1 } else { 2 },
            found.t_f,
            found.result.final_error,
            mc.feas_tol
        ),
    })
}

#[derive(Serialize)]
struct StationaryEntry {
    index: usize,
    init_w: f64,
    init_slope: f64,
    left_control: f64,
    right_control: f64,
    min: f64,
    max: f64,
    energy: f64,
    low_confidence: bool,
}

#[derive(Serialize)]
struct StationaryReport {
    length: f64,
    a: f64,
    b: f64,
    count: usize,
    solutions: Vec<StationaryEntry>,
    profiles_csv_path: String,
}

pub fn stationary(ctx: &Context) -> Result<Report, CliError> {
    let st = &ctx.cfg.stationary;
    let (a, b) = (st.a.resolve(&ctx.model)?, st.b.resolve(&ctx.model)?);
    let length = ctx.cfg.domain.length;
    if st.n < 64 {
        return Err(CliError::Config(format!("stationary.n must be at least 64, got {}", st.n)));
    }
    let sols = find_stationary_solutions_on_grid(&ctx.model, a, b, length, st.n)?;
    let mut csv = String::from("index,x,w\n");
    let mut entries = Vec::new();
    for (i, s) in sols.iter().enumerate() {
        for (x, w) in s.grid.iter().zip(&s.values) {
            csv.push_str(&format!("{i},{x},{w}\n"));
        }
        entries.push(StationaryEntry {
            index: i,
            init_w: s.init.w,
            init_slope: s.init.wp,
            left_control: s.left_control,
            right_control: s.right_control,
            min: s.values.iter().copied().fold(f64::INFINITY, f64::min),
            max: s.values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            energy: s.energy,
            low_confidence: s.low_confidence,
        });
    }
    fs::write(ctx.path("stationary.csv"), csv)?;
    let report = StationaryReport {
        length,
        a,
        b,
        count: entries.len(),
        solutions: entries,
        profiles_csv_path: "stationary.csv".into(),
    };
    save_json(&report, &ctx.path("stationary.json"))?;
    Ok(Report {
        success: true,
        summary: format!("L = {length}, boundary ({a}, {b}): {} stationary solution(s)", report.count),
    })
}
