//! Terminal-cost boundary control by discretize-then-optimize.
//!
//! The cost is `J = Σ_j w_j (y_j(T) - ŷ_j)²` with trapezoidal weights on the
//! full grid. Its gradient with respect to the discrete controls comes from
//! the exact adjoint of the time stepper in [`crate::pde`]: with
//! `A = I - ϑ dt Δ` and `B = I + (1-ϑ) dt Δ` on interior nodes,
//!
//! ```text
//! μⁿ = A⁻ᵀ λⁿ⁺¹,    λⁿ = Bᵀ μⁿ + dt f'(yⁿ) ∘ μⁿ,
//! ∂J/∂u_n = ϑ r μⁿ₁ + (1-ϑ) r μⁿ⁺¹₁
//! ```
//!
//! plus the direct dependence of `y(T)` on the last control value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{ramp, ControlSchedule, Field, Scheme, Stepper, Trajectory};
use crate::reaction::ReactionModel;

/// Bisection stops once the bracket is this narrow.
pub const TIME_TOLERANCE: f64 = 0.05;

/// Discrete terminal-cost problem.
#[derive(Debug, Clone)]
pub struct OcpSpec {
    pub model: ReactionModel,
    pub length: f64,
    pub horizon: f64,
    pub y0: Field,
    pub y_target: Field,
    pub n_x: usize,
    pub n_t: usize,
    /// Force `u = v`.
    pub tie_controls: bool,
    /// Freeze `u = v = θ`; nothing is optimized.
    pub fixed_controls: bool,
    pub u_bounds: (f64, f64),
    pub v_bounds: (f64, f64),
    pub scheme: Scheme,
    /// Constant level of [`OcpSpec::initial_schedule`].
    pub init_level: f64,
}

impl OcpSpec {
    /// Ramp initial datum and constant-θ target (constant 1 for monostable
    /// models).
    pub fn new(model: &ReactionModel, length: f64, horizon: f64, n_x: usize, n_t: usize) -> Result<Self> {
        if n_x < 16 || n_t < 16 {
            return Err(Error::Domain(format!("need n_x, n_t >= 16, got ({n_x}, {n_t})")));
        }
        if !(length > 0.0) || !(horizon > 0.0) {
            return Err(Error::Domain(format!("invalid length {length} or horizon {horizon}")));
        }
        let target = model.theta().unwrap_or(1.0);
        Ok(Self {
            model: model.clone(),
            length,
            horizon,
            y0: ramp(length, n_x),
            y_target: Field::constant(length, n_x, target),
            n_x,
            n_t,
            tie_controls: false,
            fixed_controls: false,
            u_bounds: (0.0, 1.0),
            v_bounds: (0.0, 1.0),
            scheme: Scheme::default(),
            init_level: target,
        })
    }

    pub fn with_y0(mut self, y0: Field) -> Result<Self> {
        self.check_field(&y0)?;
        self.y0 = y0;
        Ok(self)
    }

    pub fn with_target(mut self, target: Field) -> Result<Self> {
        self.check_field(&target)?;
        self.y_target = target;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn tied(mut self, tie: bool) -> Self {
        self.tie_controls = tie;
        self
    }

    fn check_field(&self, y: &Field) -> Result<()> {
        if y.n_x() != self.n_x || (y.length - self.length).abs() > 1e-12 * self.length {
            return Err(Error::DimensionMismatch(format!(
                "field has n_x = {} on L = {}, problem has n_x = {} on L = {}",
                y.n_x(),
                y.length,
                self.n_x,
                self.length
            )));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_t as f64
    }

    fn bounds(&self) -> ((f64, f64), (f64, f64)) {
        if self.tie_controls {
            let b = (
                self.u_bounds.0.max(self.v_bounds.0),
                self.u_bounds.1.min(self.v_bounds.1),
            );
            (b, b)
        } else {
            (self.u_bounds, self.v_bounds)
        }
    }

    /// Controls frozen at `θ` (or 1 for monostable models).
    pub fn static_schedule(&self) -> ControlSchedule {
        let c = self.model.theta().unwrap_or(1.0);
        ControlSchedule::constant(self.dt(), self.n_t, c, c).expect("θ lies in [0,1]")
    }

    /// Constant `init_level` (θ unless changed), projected onto the box.
    pub fn initial_schedule(&self) -> ControlSchedule {
        let c = self.init_level;
        let mut s = ControlSchedule {
            dt: self.dt(),
            u: vec![c; self.n_t],
            v: vec![c; self.n_t],
        };
        self.project(&mut s);
        s
    }

    fn project(&self, s: &mut ControlSchedule) {
        let (ub, vb) = self.bounds();
        for u in &mut s.u {
            *u = u.clamp(ub.0, ub.1);
        }
        for v in &mut s.v {
            *v = v.clamp(vb.0, vb.1);
        }
        if self.tie_controls {
            s.v.clone_from(&s.u);
        }
    }

    fn check_schedule(&self, s: &ControlSchedule) -> Result<()> {
        if s.n_steps() != self.n_t {
            return Err(Error::DimensionMismatch(format!(
                "schedule has {} steps, problem has n_t = {}",
                s.n_steps(),
                self.n_t
            )));
        }
        if (s.dt - self.dt()).abs() > 1e-9 * self.dt() {
            return Err(Error::DimensionMismatch(format!(
                "schedule dt {} differs from T/n_t = {}",
                s.dt,
                self.dt()
            )));
        }
        Ok(())
    }

    /// Trapezoidal weights of the terminal cost.
    fn weights(&self) -> Vec<f64> {
        let dx = self.length / self.n_x as f64;
        let mut w = vec![dx; self.n_x + 1];
        w[0] *= 0.5;
        w[self.n_x] *= 0.5;
        w
    }

    fn cost_of(&self, y_final: &[f64]) -> f64 {
        self.weights()
            .iter()
            .zip(y_final.iter().zip(&self.y_target.values))
            .map(|(w, (y, t))| w * (y - t) * (y - t))
            .sum()
    }

    /// Max-norm distance of a final state to the target.
    pub fn terminal_error(&self, y_final: &[f64]) -> f64 {
        self.y_target.max_distance(y_final)
    }
}

fn run_states(spec: &OcpSpec, schedule: &ControlSchedule) -> Result<Vec<Vec<f64>>> {
    spec.check_schedule(schedule)?;
    let mut stepper = Stepper::new(&spec.model, spec.length, spec.n_x, spec.dt(), spec.scheme)?;
    let mut y = spec.y0.values.clone();
    let mut states = Vec::with_capacity(spec.n_t + 1);
    states.push(y.clone());
    for k in 0..spec.n_t {
        stepper.step_in_place(&mut y, schedule.u[k], schedule.v[k])?;
        states.push(y.clone());
    }
    Ok(states)
}

/// Terminal cost of `schedule` without keeping the trajectory.
pub fn cost(spec: &OcpSpec, schedule: &ControlSchedule) -> Result<f64> {
    spec.check_schedule(schedule)?;
    let mut stepper = Stepper::new(&spec.model, spec.length, spec.n_x, spec.dt(), spec.scheme)?;
    let mut y = spec.y0.values.clone();
    for k in 0..spec.n_t {
        stepper.step_in_place(&mut y, schedule.u[k], schedule.v[k])?;
    }
    Ok(spec.cost_of(&y))
}

/// Simulate every step and evaluate the terminal cost.
pub fn forward(spec: &OcpSpec, schedule: &ControlSchedule) -> Result<(Trajectory, f64)> {
    let states = run_states(spec, schedule)?;
    let c = spec.cost_of(states.last().expect("at least the initial state"));
    let dt = spec.dt();
    let traj = Trajectory {
        length: spec.length,
        times: (0..=spec.n_t).map(|k| k as f64 * dt).collect(),
        states,
        schedule: schedule.clone(),
        max_violation: 0.0,
    };
    Ok((traj, c))
}

/// Exact gradient of the discrete cost with respect to each `u_k` and `v_k`.
/// With tied controls both vectors hold the derivative along `u = v`.
pub fn gradient(spec: &OcpSpec, schedule: &ControlSchedule) -> Result<(Vec<f64>, Vec<f64>)> {
    let e = cost_and_gradient(spec, schedule)?;
    Ok((e.grad_u, e.grad_v))
}

struct Evaluation {
    cost: f64,
    terminal_error: f64,
    grad_u: Vec<f64>,
    grad_v: Vec<f64>,
}

fn cost_and_gradient(spec: &OcpSpec, schedule: &ControlSchedule) -> Result<Evaluation> {
    let states = run_states(spec, schedule)?;
    let stepper = Stepper::new(&spec.model, spec.length, spec.n_x, spec.dt(), spec.scheme)?;
    let n = spec.n_x;
    let m = n - 1;
    let nt = spec.n_t;
    let dt = spec.dt();
    let r = stepper.mesh_ratio();
    let th = spec.scheme.implicit_weight;
    let ex = (1.0 - th) * r;
    let w = spec.weights();
    let y_final = &states[nt];
    let c = spec.cost_of(y_final);
    let terminal_error = spec.terminal_error(y_final);

    let mut gu = vec![0.0; nt];
    let mut gv = vec![0.0; nt];
    // λ on interior nodes
    let mut lambda: Vec<f64> = (1..n)
        .map(|j| 2.0 * w[j] * (y_final[j] - spec.y_target.values[j]))
        .collect();
    gu[nt - 1] += 2.0 * w[0] * (y_final[0] - spec.y_target.values[0]);
    gv[nt - 1] += 2.0 * w[n] * (y_final[n] - spec.y_target.values[n]);

    let mut mu_next_first = 0.0;
    let mut mu_next_last = 0.0;
    let mut mu = vec![0.0; m];
    for k in (0..nt).rev() {
        mu.copy_from_slice(&lambda);
        stepper.solve_in_place(&mut mu);
        gu[k] += th * r * mu[0];
        gv[k] += th * r * mu[m - 1];
        if k + 1 < nt {
            gu[k] += ex * mu_next_first;
            gv[k] += ex * mu_next_last;
        }
        mu_next_first = mu[0];
        mu_next_last = mu[m - 1];
        let y = &states[k];
        for i in 0..m {
            let left = if i > 0 { mu[i - 1] } else { 0.0 };
            let right = if i + 1 < m { mu[i + 1] } else { 0.0 };
            lambda[i] = mu[i]
                + ex * (right - 2.0 * mu[i] + left)
                + dt * spec.model.f_prime(y[i + 1]) * mu[i];
        }
    }
    if spec.fixed_controls {
        gu.iter_mut().for_each(|g| *g = 0.0);
        gv.iter_mut().for_each(|g| *g = 0.0);
    } else if spec.tie_controls {
        for k in 0..nt {
            let s = gu[k] + gv[k];
            gu[k] = s;
            gv[k] = s;
        }
    }
    Ok(Evaluation {
        cost: c,
        terminal_error,
        grad_u: gu,
        grad_v: gv,
    })
}

/// Outcome of [`solve_terminal`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimResult {
    pub schedule: ControlSchedule,
    pub cost_history: Vec<f64>,
    pub final_cost: f64,
    pub grad_norm_final: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `‖y(T) - ŷ‖∞` of the returned schedule.
    pub final_error: f64,
}

/// Stopping rules for [`solve_terminal_with`].
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Bound on the projected-gradient norm `‖P(x - ∇J) - x‖₂`.
    pub tol_grad: f64,
    /// Stop as soon as `‖y(T) - ŷ‖∞` drops below this.
    pub target_error: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tol_grad: 1e-10,
            target_error: None,
        }
    }
}

/// Projected gradient descent with Armijo backtracking; the first trial step
/// of each iteration is the Barzilai–Borwein step.
pub fn solve_terminal(
    spec: &OcpSpec,
    init: &ControlSchedule,
    max_iters: usize,
    tol_grad: f64,
) -> Result<OptimResult> {
    solve_terminal_with(
        spec,
        init,
        SolveOptions {
            max_iters,
            tol_grad,
            target_error: None,
        },
    )
}

struct Problem<'a> {
    spec: &'a OcpSpec,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Problem<'_> {
    fn new(spec: &OcpSpec) -> Problem<'_> {
        let (ub, vb) = spec.bounds();
        let nt = spec.n_t;
        let (lo, hi) = if spec.tie_controls {
            (vec![ub.0; nt], vec![ub.1; nt])
        } else {
            let mut lo = vec![ub.0; nt];
            lo.extend(std::iter::repeat_n(vb.0, nt));
            let mut hi = vec![ub.1; nt];
            hi.extend(std::iter::repeat_n(vb.1, nt));
            (lo, hi)
        };
        Problem { spec, lo, hi }
    }

    fn pack(&self, s: &ControlSchedule) -> Vec<f64> {
        let mut x = s.u.clone();
        if !self.spec.tie_controls {
            x.extend_from_slice(&s.v);
        }
        x
    }

    fn unpack(&self, x: &[f64]) -> ControlSchedule {
        let nt = self.spec.n_t;
        let (u, v) = if self.spec.tie_controls {
            (x.to_vec(), x.to_vec())
        } else {
            (x[..nt].to_vec(), x[nt..].to_vec())
        };
        ControlSchedule {
            dt: self.spec.dt(),
            u,
            v,
        }
    }

    fn project(&self, x: &mut [f64]) {
        for ((xi, lo), hi) in x.iter_mut().zip(&self.lo).zip(&self.hi) {
            *xi = xi.clamp(*lo, *hi);
        }
    }

    /// Cost, terminal max-norm error and gradient in packed form.
    fn eval(&self, x: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
        let e = cost_and_gradient(self.spec, &self.unpack(x))?;
        let g = if self.spec.tie_controls {
            e.grad_u
        } else {
            let mut g = e.grad_u;
            g.extend_from_slice(&e.grad_v);
            g
        };
        Ok((e.cost, e.terminal_error, g))
    }

    fn projected_gradient_norm(&self, x: &[f64], g: &[f64]) -> f64 {
        x.iter()
            .zip(g)
            .zip(self.lo.iter().zip(&self.hi))
            .map(|((xi, gi), (lo, hi))| {
                let d = (xi - gi).clamp(*lo, *hi) - xi;
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

pub fn solve_terminal_with(
    spec: &OcpSpec,
    init: &ControlSchedule,
    opts: SolveOptions,
) -> Result<OptimResult> {
    spec.check_schedule(init)?;
    if spec.fixed_controls {
        let schedule = spec.static_schedule();
        let (traj, c) = forward(spec, &schedule)?;
        return Ok(OptimResult {
            final_error: spec.terminal_error(&traj.states[spec.n_t]),
            schedule,
            cost_history: vec![c],
            final_cost: c,
            grad_norm_final: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let prob = Problem::new(spec);
    let mut x = prob.pack(init);
    prob.project(&mut x);
    let (mut c, mut err, mut g) = prob.eval(&x)?;
    let mut history = vec![c];
    let mut pg = prob.projected_gradient_norm(&x, &g);
    let mut iterations = 0;
    let mut converged = pg <= opts.tol_grad;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let reached = |err: f64| opts.target_error.is_some_and(|tol| err <= tol);
    let mut done = converged || reached(err);

    while !done && iterations < opts.max_iters {
        let gmax = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if gmax == 0.0 {
            converged = true;
            break;
        }
        let mut alpha = match &prev {
            Some((dx, dg)) => {
                let sy: f64 = dx.iter().zip(dg).map(|(a, b)| a * b).sum();
                let ss: f64 = dx.iter().map(|a| a * a).sum();
                if sy > 0.0 {
                    ss / sy
                } else {
                    0.1 / gmax
                }
            }
            None => 0.1 / gmax,
        };
        // keep trial steps within a unit move of the controls
        alpha = alpha.min(1.0 / gmax);
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - alpha * gi).collect();
            prob.project(&mut trial);
            let decrease: f64 = trial.iter().zip(&x).zip(&g).map(|((t, xi), gi)| gi * (t - xi)).sum();
            if decrease == 0.0 {
                break;
            }
            let (ct, et, gt) = prob.eval(&trial)?;
            if ct <= c + 1e-4 * decrease {
                accepted = Some((trial, ct, et, gt));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, cn, en, gn)) = accepted else {
            // no descent possible at machine precision
            break;
        };
        let dx: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let dg: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        prev = Some((dx, dg));
        x = xn;
        c = cn;
        err = en;
        g = gn;
        history.push(c);
        iterations += 1;
        pg = prob.projected_gradient_norm(&x, &g);
        if pg <= opts.tol_grad {
            converged = true;
            done = true;
        } else {
            done = reached(err);
        }
    }

    Ok(OptimResult {
        final_error: err,
        schedule: prob.unpack(&x),
        cost_history: history,
        final_cost: c,
        grad_norm_final: pg,
        iterations,
        converged,
    })
}

/// Outcome of [`minimal_time`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimalTime {
    pub t_f: f64,
    pub result: OptimResult,
    /// `(T, feasible)` for every horizon tried.
    pub probes: Vec<(f64, bool)>,
}

/// Smallest horizon in `[t_lo, t_hi]`, to within [`TIME_TOLERANCE`], at which
/// [`solve_terminal_with`] brings `‖y(T) - ŷ‖∞` below `feas_tol`. The number
/// of steps `n_t` stays fixed, so the warm start (the last feasible schedule
/// seen as a function of `t/T`) is the same control vector.
pub fn minimal_time(
    spec: &OcpSpec,
    t_lo: f64,
    t_hi: f64,
    feas_tol: f64,
    max_bisect: usize,
    opts: SolveOptions,
) -> Result<MinimalTime> {
    if !(t_hi > t_lo) || t_lo < 0.0 {
        return Err(Error::Domain(format!("invalid bracket [{t_lo}, {t_hi}]")));
    }
    let opts = SolveOptions {
        target_error: Some(feas_tol),
        ..opts
    };
    let mut probes = Vec::new();
    let solve_at = |t: f64, warm: &[f64], tied: bool| -> Result<OptimResult> {
        let s = spec.clone().with_horizon(t);
        let init = ControlSchedule {
            dt: s.dt(),
            u: warm[..s.n_t].to_vec(),
            v: if tied { warm[..s.n_t].to_vec() } else { warm[s.n_t..].to_vec() },
        };
        solve_terminal_with(&s, &init, opts)
    };
    let init = spec.clone().with_horizon(t_hi).initial_schedule();
    let mut warm: Vec<f64> = init.u.iter().chain(&init.v).copied().collect();
    let hi_res = solve_at(t_hi, &warm, spec.tie_controls)?;
    let feasible = hi_res.final_error <= feas_tol;
    probes.push((t_hi, feasible));
    if !feasible {
        return Err(Error::InfeasibleUpperBound(t_hi));
    }
    let (mut lo, mut hi) = (t_lo, t_hi);
    let mut best = hi_res;
    // a trivially feasible start needs no control time at all
    if spec.terminal_error(&spec.y0.values) <= feas_tol {
        let s = spec.clone().with_horizon(t_lo.max(1e-9));
        let (traj, c) = forward(&s, &s.initial_schedule())?;
        if s.terminal_error(&traj.states[s.n_t]) <= feas_tol {
            hi = t_lo;
            best.final_cost = c;
        }
    }
    let mut count = 0;
    while hi - lo > TIME_TOLERANCE && count < max_bisect {
        count += 1;
        let mid = 0.5 * (lo + hi);
        warm = best.schedule.u.iter().chain(&best.schedule.v).copied().collect();
        let res = solve_at(mid, &warm, spec.tie_controls)?;
        let feasible = res.final_error <= feas_tol;
        probes.push((mid, feasible));
        if feasible {
            hi = mid;
            best = res;
        } else {
            lo = mid;
        }
    }
    Ok(MinimalTime {
        t_f: hi,
        result: best,
        probes,
    })
}
