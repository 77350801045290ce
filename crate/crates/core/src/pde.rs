//! Time stepping of `y_t - y_xx = f(y)` on `(0, L)` with Dirichlet data
//! `y(t,0) = u(t)`, `y(t,L) = v(t)` in `[0, 1]`.
//!
//! One step of the weighted scheme (`ϑ` = implicit weight) reads
//!
//! ```text
//! (I - ϑ dt Δ) y^{n+1} = (I + (1-ϑ) dt Δ) y^n + dt f(y^n)
//! ```
//!
//! with the 3-point Laplacian `Δ` and boundary rows pinned to the controls.
//! The default `ϑ = 1` is monotone whenever `dt · Lip(f) ≤ 1`; `ϑ = 1/2`
//! (Crank–Nicolson diffusion) additionally needs `dt/dx² ≤ 1/2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reaction::ReactionModel;

/// Overshoot tolerated before a value counts as a bound violation.
pub const BOUND_SLACK: f64 = 1e-10;

/// Reaction term evaluated by the time stepper.
pub trait ReactionTerm {
    fn rate(&self, y: f64) -> f64;
    fn rate_prime(&self, y: f64) -> f64;
    /// Bound on `|f'|` over `[0, 1]`.
    fn lipschitz(&self) -> f64;
}

impl ReactionTerm for ReactionModel {
    #[inline]
    fn rate(&self, y: f64) -> f64 {
        self.f(y)
    }
    #[inline]
    fn rate_prime(&self, y: f64) -> f64 {
        self.f_prime(y)
    }
    fn lipschitz(&self) -> f64 {
        ReactionModel::lipschitz(self)
    }
}

/// `f ≡ 0`: the plain heat equation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoReaction;

impl ReactionTerm for NoReaction {
    fn rate(&self, _: f64) -> f64 {
        0.0
    }
    fn rate_prime(&self, _: f64) -> f64 {
        0.0
    }
    fn lipschitz(&self) -> f64 {
        0.0
    }
}

/// State sample on the uniform grid `x_j = j L / n_x`, `j = 0..=n_x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub length: f64,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(length: f64, values: Vec<f64>) -> Self {
        Self { length, values }
    }

    pub fn from_fn<F: Fn(f64) -> f64>(length: f64, n_x: usize, f: F) -> Self {
        let values = (0..=n_x).map(|j| f(j as f64 * length / n_x as f64)).collect();
        Self { length, values }
    }

    pub fn constant(length: f64, n_x: usize, c: f64) -> Self {
        Self {
            length,
            values: vec![c; n_x + 1],
        }
    }

    pub fn n_x(&self) -> usize {
        self.values.len() - 1
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n_x() as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        let n = self.n_x();
        (0..=n).map(|j| j as f64 * self.length / n as f64).collect()
    }

    pub fn max_distance(&self, other: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn distance_to_constant(&self, c: f64) -> f64 {
        self.values.iter().map(|v| (v - c).abs()).fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_j |Δ_h y_j + f(y_j)|` over interior nodes.
    pub fn stationary_residual<R: ReactionTerm + ?Sized>(&self, reaction: &R) -> f64 {
        let n = self.n_x();
        let dx2 = self.dx() * self.dx();
        (1..n)
            .map(|j| {
                let lap = (self.values[j + 1] - 2.0 * self.values[j] + self.values[j - 1]) / dx2;
                (lap + reaction.rate(self.values[j])).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Trapezoidal `∫_0^L g(y(x)) dx`.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        let n = self.n_x();
        let inner: f64 = self.values[1..n].iter().map(|&v| g(v)).sum();
        self.dx() * (inner + 0.5 * (g(self.values[0]) + g(self.values[n])))
    }
}

/// `y_0(x) = 0.1 x/L + 0.8 (1 - x/L)`, the initial datum of the reference
/// experiments.
pub fn ramp(length: f64, n_x: usize) -> Field {
    Field::from_fn(length, n_x, |x| 0.1 * x / length + 0.8 * (1.0 - x / length))
}

/// Boundary controls, constant on each step `[k dt, (k+1) dt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    pub dt: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl ControlSchedule {
    pub fn new(dt: f64, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("dt must be positive, got {dt}")));
        }
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "left has {} steps, right has {}",
                u.len(),
                v.len()
            )));
        }
        if let Some(bad) = u.iter().chain(&v).find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::Domain(format!("control value {bad} outside [0,1]")));
        }
        Ok(Self { dt, u, v })
    }

    pub fn constant(dt: f64, n_steps: usize, u: f64, v: f64) -> Result<Self> {
        Self::new(dt, vec![u; n_steps], vec![v; n_steps])
    }

    pub fn n_steps(&self) -> usize {
        self.u.len()
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.n_steps() as f64
    }

    /// `t_k = k dt`, `k = 0..=n_steps`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps()).map(|k| k as f64 * self.dt).collect()
    }

    pub fn within_bounds(&self) -> bool {
        self.u.iter().chain(&self.v).all(|c| (0.0..=1.0).contains(c))
    }

    pub fn extend(&mut self, other: &ControlSchedule) -> Result<()> {
        if (other.dt - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::DimensionMismatch(format!(
                "cannot join schedules with dt {} and {}",
                self.dt, other.dt
            )));
        }
        self.u.extend_from_slice(&other.u);
        self.v.extend_from_slice(&other.v);
        Ok(())
    }
}

/// Diffusion weighting of the step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scheme {
    /// `ϑ ∈ [1/2, 1]`: `1` is backward Euler, `1/2` Crank–Nicolson.
    pub implicit_weight: f64,
}

impl Default for Scheme {
    fn default() -> Self {
        Self::backward_euler()
    }
}

impl Scheme {
    pub fn backward_euler() -> Self {
        Self {
            implicit_weight: 1.0,
        }
    }

    pub fn crank_nicolson() -> Self {
        Self {
            implicit_weight: 0.5,
        }
    }
}

/// `min(1e-3, 0.9 / Lip(f))`.
pub fn reference_dt<R: ReactionTerm + ?Sized>(reaction: &R) -> f64 {
    let lip = reaction.lipschitz();
    if lip > 0.0 {
        (0.9 / lip).min(1e-3)
    } else {
        1e-3
    }
}

/// Pre-factored stepper for a fixed grid, time step and scheme.
pub struct Stepper<'a, R: ReactionTerm + ?Sized> {
    reaction: &'a R,
    n_x: usize,
    dt: f64,
    weight: f64,
    ratio: f64,
    // Thomas elimination factors for the constant implicit matrix
    c_prime: Vec<f64>,
    inv_denom: Vec<f64>,
    rhs: Vec<f64>,
    max_violation: f64,
    violations: usize,
}

impl<'a, R: ReactionTerm + ?Sized> Stepper<'a, R> {
    pub fn new(reaction: &'a R, length: f64, n_x: usize, dt: f64, scheme: Scheme) -> Result<Self> {
        if n_x < 2 {
            return Err(Error::Domain(format!("need at least 2 intervals, got {n_x}")));
        }
        if !(dt > 0.0) || !(length > 0.0) {
            return Err(Error::Domain(format!("invalid dt {dt} or length {length}")));
        }
        let weight = scheme.implicit_weight;
        if !(0.5..=1.0).contains(&weight) {
            return Err(Error::Domain(format!("implicit weight {weight} outside [1/2, 1]")));
        }
        let dx = length / n_x as f64;
        let ratio = dt / (dx * dx);
        let m = n_x - 1;
        let off = -weight * ratio;
        let diag = 1.0 + 2.0 * weight * ratio;
        let mut c_prime = vec![0.0; m];
        let mut inv_denom = vec![0.0; m];
        let mut prev_c = 0.0;
        for i in 0..m {
            let denom = diag - off * prev_c;
            inv_denom[i] = 1.0 / denom;
            c_prime[i] = off * inv_denom[i];
            prev_c = c_prime[i];
        }
        Ok(Self {
            reaction,
            n_x,
            dt,
            weight,
            ratio,
            c_prime,
            inv_denom,
            rhs: vec![0.0; m],
            max_violation: 0.0,
            violations: 0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `dt/dx²`.
    pub fn mesh_ratio(&self) -> f64 {
        self.ratio
    }

    /// Whether the explicit part is a monotone map, so that ordered data
    /// stay ordered and `[0, 1]` is invariant.
    pub fn is_monotone(&self) -> bool {
        1.0 - 2.0 * (1.0 - self.weight) * self.ratio - self.dt * self.reaction.lipschitz() >= -1e-14
    }

    pub fn max_violation(&self) -> f64 {
        self.max_violation
    }

    pub fn violations(&self) -> usize {
        self.violations
    }

    /// Solve `A x = rhs` in place for the constant implicit matrix.
    pub(crate) fn solve_in_place(&self, x: &mut [f64]) {
        let m = x.len();
        let off = -self.weight * self.ratio;
        x[0] *= self.inv_denom[0];
        for i in 1..m {
            x[i] = (x[i] - off * x[i - 1]) * self.inv_denom[i];
        }
        for i in (0..m - 1).rev() {
            x[i] -= self.c_prime[i] * x[i + 1];
        }
    }

    /// Apply the explicit operator `(I + (1-ϑ) dt Δ) y + dt f(y)` restricted
    /// to interior nodes, writing into `out` (length `n_x - 1`).
    fn explicit_part(&self, y: &[f64], out: &mut [f64]) {
        let ex = (1.0 - self.weight) * self.ratio;
        for j in 1..self.n_x {
            out[j - 1] = y[j]
                + ex * (y[j + 1] - 2.0 * y[j] + y[j - 1])
                + self.dt * self.reaction.rate(y[j]);
        }
    }

    /// Advance `y` by one step with boundary values `(u, v)` at the new level.
    pub fn step_in_place(&mut self, y: &mut [f64], u: f64, v: f64) -> Result<()> {
        if y.len() != self.n_x + 1 {
            return Err(Error::DimensionMismatch(format!(
                "field has {} values, stepper expects {}",
                y.len(),
                self.n_x + 1
            )));
        }
        let mut rhs = std::mem::take(&mut self.rhs);
        self.explicit_part(y, &mut rhs);
        let m = rhs.len();
        rhs[0] += self.weight * self.ratio * u;
        rhs[m - 1] += self.weight * self.ratio * v;
        self.solve_in_place(&mut rhs);
        y[0] = u;
        y[self.n_x] = v;
        for (j, val) in rhs.iter().enumerate() {
            if !val.is_finite() {
                self.rhs = rhs;
                return Err(Error::Numerical("non-finite value in linear solve".into()));
            }
            let clamped = val.clamp(-BOUND_SLACK, 1.0 + BOUND_SLACK);
            if clamped != *val {
                self.violations += 1;
                self.max_violation = self.max_violation.max((val - clamped).abs());
            }
            y[j + 1] = clamped;
        }
        self.rhs = rhs;
        Ok(())
    }
}

/// One step from `y` with controls `(u_k, v_k)` using the default scheme.
pub fn step<R: ReactionTerm + ?Sized>(
    reaction: &R,
    y: &Field,
    u_k: f64,
    v_k: f64,
    dt: f64,
) -> Result<Field> {
    step_with(reaction, y, u_k, v_k, dt, Scheme::default())
}

pub fn step_with<R: ReactionTerm + ?Sized>(
    reaction: &R,
    y: &Field,
    u_k: f64,
    v_k: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<Field> {
    if !(0.0..=1.0).contains(&u_k) || !(0.0..=1.0).contains(&v_k) {
        return Err(Error::Domain(format!("controls ({u_k}, {v_k}) outside [0,1]")));
    }
    let mut stepper = Stepper::new(reaction, y.length, y.n_x(), dt, scheme)?;
    let mut out = y.clone();
    stepper.step_in_place(&mut out.values, u_k, v_k)?;
    Ok(out)
}

/// Recorded run of the controlled equation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub length: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub schedule: ControlSchedule,
    /// Largest clamp applied by the scheme (0 when the bounds held).
    pub max_violation: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn field(&self, i: usize) -> Field {
        Field::new(self.length, self.states[i].clone())
    }

    pub fn last(&self) -> Field {
        self.field(self.len() - 1)
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    /// Max-norm distance of every snapshot to `target`.
    pub fn distances_to(&self, target: &[f64]) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| s.iter().zip(target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .collect()
    }

    /// Lyapunov value of every snapshot (see [`lyapunov_v`]).
    pub fn lyapunov(&self) -> Result<Vec<f64>> {
        (0..self.len()).map(|i| lyapunov_v(&self.field(i))).collect()
    }

    /// Snapshot index closest to time `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// Run `schedule` from `y0`, recording every `record_every` steps (and the
/// final state), with the default scheme.
pub fn simulate<R: ReactionTerm + ?Sized>(
    reaction: &R,
    y0: &Field,
    schedule: &ControlSchedule,
    record_every: usize,
) -> Result<Trajectory> {
    simulate_with(reaction, y0, schedule, record_every, Scheme::default())
}

pub fn simulate_with<R: ReactionTerm + ?Sized>(
    reaction: &R,
    y0: &Field,
    schedule: &ControlSchedule,
    record_every: usize,
    scheme: Scheme,
) -> Result<Trajectory> {
    if y0.values.iter().any(|v| !(-BOUND_SLACK..=1.0 + BOUND_SLACK).contains(v)) {
        return Err(Error::Domain("initial state outside [0,1]".into()));
    }
    let every = record_every.max(1);
    let mut stepper = Stepper::new(reaction, y0.length, y0.n_x(), schedule.dt, scheme)?;
    let mut y = y0.values.clone();
    let mut times = vec![0.0];
    let mut states = vec![y.clone()];
    let n = schedule.n_steps();
    for k in 0..n {
        stepper.step_in_place(&mut y, schedule.u[k], schedule.v[k])?;
        if (k + 1) % every == 0 || k + 1 == n {
            times.push((k + 1) as f64 * schedule.dt);
            states.push(y.clone());
        }
    }
    Ok(Trajectory {
        length: y0.length,
        times,
        states,
        schedule: schedule.clone(),
        max_violation: stepper.max_violation(),
    })
}

/// The trailing snapshot when the run has settled: controls constant over
/// the last `window` time units, max-norm change over that window `≤ tol`,
/// and stationary residual `≤ 10 tol`.
pub fn detect_convergence<R: ReactionTerm + ?Sized>(
    reaction: &R,
    traj: &Trajectory,
    window: f64,
    tol: f64,
) -> Option<Field> {
    let t_end = traj.final_time();
    let sched = &traj.schedule;
    let first_step = (((t_end - window) / sched.dt).floor().max(0.0)) as usize;
    let tail_u = &sched.u[first_step.min(sched.n_steps())..];
    let tail_v = &sched.v[first_step.min(sched.n_steps())..];
    let constant = |c: &[f64]| c.windows(2).all(|w| w[0] == w[1]);
    if !constant(tail_u) || !constant(tail_v) {
        return None;
    }
    let last = traj.last();
    let start = traj
        .times
        .iter()
        .rposition(|&t| t <= t_end - window + 1e-12)
        .unwrap_or(0);
    let change = (start..traj.len())
        .map(|i| last.max_distance(&traj.states[i]))
        .fold(0.0, f64::max);
    if change <= tol && last.stationary_residual(reaction) <= 10.0 * tol {
        Some(last)
    } else {
        None
    }
}

/// `V = ∫_0^L (y - 1 - ln y) dx`, nonincreasing along runs with `u = v = 1`
/// for monostable reactions.
pub fn lyapunov_v(y: &Field) -> Result<f64> {
    if let Some(bad) = y.values.iter().find(|&&v| v <= 1e-14) {
        return Err(Error::Domain(format!("ln undefined for sample {bad}")));
    }
    Ok(y.integrate(|v| v - 1.0 - v.ln()))
}

/// Largest value of `low - high` over all steps and nodes when both runs
/// share `schedule`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub max_gap: f64,
    pub monotone_step: bool,
}

pub fn check_comparison<R: ReactionTerm + ?Sized>(
    reaction: &R,
    low: &Field,
    high: &Field,
    schedule: &ControlSchedule,
    scheme: Scheme,
) -> Result<ComparisonReport> {
    if low.values.len() != high.values.len() {
        return Err(Error::DimensionMismatch("fields on different grids".into()));
    }
    if low.values.iter().zip(&high.values).any(|(a, b)| a > b) {
        return Err(Error::Domain("initial data are not ordered".into()));
    }
    let mut s_low = Stepper::new(reaction, low.length, low.n_x(), schedule.dt, scheme)?;
    let mut s_high = Stepper::new(reaction, high.length, high.n_x(), schedule.dt, scheme)?;
    let (mut a, mut b) = (low.values.clone(), high.values.clone());
    let mut max_gap = a.iter().zip(&b).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max);
    for k in 0..schedule.n_steps() {
        s_low.step_in_place(&mut a, schedule.u[k], schedule.v[k])?;
        s_high.step_in_place(&mut b, schedule.u[k], schedule.v[k])?;
        let gap = a.iter().zip(&b).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max);
        max_gap = max_gap.max(gap);
    }
    Ok(ComparisonReport {
        max_gap,
        monotone_step: s_low.is_monotone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn equilibria_are_fixed_points() {
        let m = ReactionModel::cubic(1.0 / 3.0).unwrap();
        for c in [0.0, 1.0 / 3.0, 1.0] {
            let y = Field::constant(8.0, 100, c);
            let next = step(&m, &y, c, c, 0.01).unwrap();
            assert!(next.distance_to_constant(c) < 1e-15, "{c}");
        }
    }

    #[test]
    fn heat_mode_decays_at_the_discrete_rate() {
        let l = 1.0;
        let n = 50;
        let dt = 1e-3;
        let y0 = Field::from_fn(l, n, |x| (PI * x / l).sin());
        let sched = ControlSchedule::constant(dt, 100, 0.0, 0.0).unwrap();
        let tr = simulate_with(&NoReaction, &y0, &sched, 100, Scheme::crank_nicolson()).unwrap();
        let t = tr.final_time();
        let exact = (-(PI / l).powi(2) * t).exp();
        let err = tr.last().max_distance(&y0.values.iter().map(|v| v * exact).collect::<Vec<_>>());
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn rejects_out_of_range_controls() {
        assert!(ControlSchedule::constant(0.1, 3, 1.2, 0.0).is_err());
        let m = ReactionModel::logistic();
        assert!(step(&m, &Field::constant(1.0, 10, 0.5), -0.1, 0.0, 0.1).is_err());
    }

    #[test]
    fn lyapunov_values() {
        assert_eq!(lyapunov_v(&Field::constant(3.0, 10, 1.0)).unwrap(), 0.0);
        let v = lyapunov_v(&Field::constant(1.0, 10, 0.5)).unwrap();
        assert!((v - (0.5 - 1.0 + 2f64.ln())).abs() < 1e-14);
        assert!(lyapunov_v(&Field::constant(1.0, 10, 0.0)).is_err());
    }

    #[test]
    fn convergence_needs_constant_controls() {
        let m = ReactionModel::cubic(1.0 / 3.0).unwrap();
        let y0 = Field::constant(5.0, 50, 1.0 / 3.0);
        let sched = ControlSchedule::constant(0.01, 200, 1.0 / 3.0, 1.0 / 3.0).unwrap();
        let tr = simulate(&m, &y0, &sched, 10).unwrap();
        assert!(detect_convergence(&m, &tr, 1.0, 1e-6).is_some());
        let u: Vec<f64> = (0..200).map(|k| if k % 2 == 0 { 0.2 } else { 0.4 }).collect();
        let sched = ControlSchedule::new(0.01, u.clone(), u).unwrap();
        let tr = simulate(&m, &y0, &sched, 10).unwrap();
        assert!(detect_convergence(&m, &tr, 1.0, 1e-6).is_none());
    }
}
