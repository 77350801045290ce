//! Phase-plane analysis of the stationary equation `-w'' = f(w)`.
//!
//! Steady states of the controlled equation are arcs of the Hamiltonian
//! system `w' = z, z' = -f(w)` whose energy `z²/2 + F(w)` is conserved. The
//! threshold lengths are infima of arc lengths between two crossings of a
//! level, computed here from desingularized integrals.

mod path;
mod stationary;
mod thresholds;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reaction::ReactionModel;

pub use path::{build_path_to_theta, SteadyPath, DEFAULT_PATH_GAP, DEFAULT_PATH_STEPS};
pub use stationary::{
    find_stationary_solutions, find_stationary_solutions_on_grid, integrate_stationary,
    Integration, SHOOTING_SAMPLES,
};
pub use thresholds::{
    l_a, l_star, l_star_lower_bound, l_theta, l_theta_lower_bound, length_of_alpha,
    turning_length, Threshold, ThresholdReport, LENGTH_CAP,
};

/// A point `(w, w')` of the stationary phase plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub w: f64,
    pub wp: f64,
}

impl PhasePoint {
    pub fn new(w: f64, wp: f64) -> Self {
        Self { w, wp }
    }
}

/// Conserved energy `wp²/2 + F(w)`.
pub fn energy(model: &ReactionModel, p: PhasePoint) -> f64 {
    0.5 * p.wp * p.wp + model.primitive(p.w)
}

/// Membership in the region bounded by the homoclinic orbit through 0,
/// `|w'| ≤ sqrt(-2 F(w))`.
pub fn in_gamma(model: &ReactionModel, p: PhasePoint) -> Result<bool> {
    let theta1 = model.theta1().ok_or(Error::NotBistable)?;
    if p.w < 0.0 || p.w > theta1 {
        return Err(Error::Domain(format!(
            "w = {} outside [0, θ₁ = {theta1}]",
            p.w
        )));
    }
    Ok(energy(model, p) <= 1e-12)
}

/// A stationary profile sampled on a uniform grid of `[0, L]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub length: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// `w'` at each sample, taken from the integrator.
    pub slopes: Vec<f64>,
    pub left_control: f64,
    pub right_control: f64,
    pub init: PhasePoint,
    pub energy: f64,
    /// Set for roots found as tangential (double) zeros of the shooting map.
    #[serde(default)]
    pub low_confidence: bool,
}

impl SteadyState {
    /// The constant profile `c` (an equilibrium of `f`).
    pub fn constant(model: &ReactionModel, c: f64, length: f64, n: usize) -> Self {
        let grid: Vec<f64> = (0..=n).map(|j| j as f64 * length / n as f64).collect();
        Self {
            length,
            values: vec![c; n + 1],
            slopes: vec![0.0; n + 1],
            grid,
            left_control: c,
            right_control: c,
            init: PhasePoint::new(c, 0.0),
            energy: model.primitive(c),
            low_confidence: false,
        }
    }

    pub fn n_intervals(&self) -> usize {
        self.values.len() - 1
    }

    /// `max_j |-w''_j - f(w_j)|` with the 3-point stencil on the sample grid.
    pub fn residual(&self, model: &ReactionModel) -> f64 {
        let n = self.n_intervals();
        let dx = self.length / n as f64;
        (1..n)
            .map(|j| {
                let lap = (self.values[j + 1] - 2.0 * self.values[j] + self.values[j - 1]) / (dx * dx);
                (lap + model.f(self.values[j])).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest deviation of the sampled energy from the initial energy.
    pub fn energy_drift(&self, model: &ReactionModel) -> f64 {
        self.values
            .iter()
            .zip(&self.slopes)
            .map(|(&w, &z)| (0.5 * z * z + model.primitive(w) - self.energy).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_distance(&self, other: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
