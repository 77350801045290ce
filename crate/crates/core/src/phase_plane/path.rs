use serde::{Deserialize, Serialize};

use super::stationary::{integrate_stationary, Integration};
use super::thresholds::l_star;
use super::{in_gamma, PhasePoint, SteadyState};
use crate::error::{Error, Result};
use crate::reaction::ReactionModel;

pub const DEFAULT_PATH_STEPS: usize = 64;
/// Largest max-norm gap allowed between consecutive states of a path.
pub const DEFAULT_PATH_GAP: f64 = 0.02;

const MAX_PATH_STEPS: usize = 8192;

/// Admissible steady states `w_s`, `s = 0, 1/N, ..., 1`, with their boundary
/// values `(u_s, v_s) = (w_s(0), w_s(L))`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteadyPath {
    pub s: Vec<f64>,
    pub states: Vec<SteadyState>,
    pub controls: Vec<(f64, f64)>,
    /// Largest max-norm distance between consecutive states.
    pub max_gap: f64,
}

impl SteadyPath {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Straight segment in the phase plane from `y_init`'s shooting datum to
/// `(θ, 0)`; every point is integrated over `[0, L]`. Starting from
/// `n_steps` uniform steps, midpoints are inserted wherever consecutive
/// states are more than `max_gap` apart.
pub fn build_path_to_theta(
    model: &ReactionModel,
    y_init: &SteadyState,
    length: f64,
    n_steps: usize,
    max_gap: f64,
) -> Result<SteadyPath> {
    let theta = model.require_theta()?;
    if !in_gamma(model, y_init.init)? {
        return Err(Error::Domain(
            "initial steady state is not inside the homoclinic region".into(),
        ));
    }
    let threshold = l_star(model)?.value;
    if length >= threshold {
        return Err(Error::Infeasible { length, threshold });
    }
    let n_grid = y_init.n_intervals().max(64);
    let start = y_init.init;
    let state_at = |s: f64| -> Result<SteadyState> {
        let state = if s == 1.0 {
            SteadyState::constant(model, theta, length, n_grid)
        } else {
            let c = PhasePoint::new((1.0 - s) * start.w + s * theta, (1.0 - s) * start.wp);
            match integrate_stationary(model, c, length, n_grid)? {
                Integration::Inside(st) => st,
                Integration::Exited { x, .. } => {
                    return Err(Error::PathInfeasible {
                        s,
                        reason: format!("profile leaves [0,1] at x = {x}"),
                    })
                }
            }
        };
        let (u, v) = (state.left_control, state.right_control);
        if !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0) {
            return Err(Error::PathInfeasible {
                s,
                reason: format!("boundary values ({u}, {v}) not inside (0,1)"),
            });
        }
        Ok(state)
    };

    let steps = n_steps.max(1);
    let mut s_vals: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    let mut states = s_vals.iter().map(|&s| state_at(s)).collect::<Result<Vec<_>>>()?;
    loop {
        let mut refined_s = vec![s_vals[0]];
        let mut refined = vec![states[0].clone()];
        let mut inserted = false;
        for k in 1..states.len() {
            if states.len() + refined.len() < MAX_PATH_STEPS
                && states[k - 1].max_distance(&states[k].values) > max_gap
            {
                let mid = 0.5 * (s_vals[k - 1] + s_vals[k]);
                refined_s.push(mid);
                refined.push(state_at(mid)?);
                inserted = true;
            }
            refined_s.push(s_vals[k]);
            refined.push(states[k].clone());
        }
        s_vals = refined_s;
        states = refined;
        if !inserted {
            break;
        }
    }
    let max_gap_found = states
        .windows(2)
        .map(|w| w[0].max_distance(&w[1].values))
        .fold(0.0, f64::max);
    let controls = states
        .iter()
        .map(|st| (st.left_control, st.right_control))
        .collect();
    Ok(SteadyPath {
        s: s_vals,
        states,
        controls,
        max_gap: max_gap_found,
    })
}
