//! Threshold lengths `L*`, `L_θ`, `L^a` and the spectral lower bounds.
//!
//! All lengths are built from the half-arc integral
//! `∫ dy / sqrt(F(β) - F(y))` between a start level and a simple turning
//! point `β`. With `y = β ∓ s²` the inverse square-root singularity at the
//! turning point cancels against `dy = ∓2s ds`, leaving the smooth
//! integrand `2 / sqrt(|(F(β) - F(y)) / (β - y)|)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::json_f64;
use crate::quadrature::{self, QuadOptions};
use crate::reaction::{ModelKind, ReactionModel};
use crate::scalar::golden_section;

/// Lengths above this value are reported as `+inf`.
pub const LENGTH_CAP: f64 = 1e6;

const SCAN_POINTS: usize = 128;
const SCAN_SPAN: f64 = 23.0; // logit range, endpoints ~1e-10 from 0 and 1

/// Infimum of a length functional together with where it is reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    #[serde(with = "json_f64")]
    pub value: f64,
    /// `false` when the infimum is only approached at the edge of the
    /// parameter range.
    pub attained: bool,
    /// Minimizing parameter (α for `L*`, β for `L_θ` and `L^a`).
    pub argmin: Option<f64>,
}

impl Threshold {
    fn infinite() -> Self {
        Self {
            value: f64::INFINITY,
            attained: false,
            argmin: None,
        }
    }
}

/// Length `√2 |∫_start^turn dy / sqrt(F(turn) - F(y))|` of the arc that
/// leaves level `start`, turns at `turn` and comes back. Returns `+inf` when
/// `turn` is not a simple turning point or the arc is longer than
/// [`LENGTH_CAP`].
pub fn turning_length(model: &ReactionModel, start: f64, turn: f64) -> f64 {
    if start == turn {
        return 0.0;
    }
    let sigma = (turn - start).signum();
    if sigma * model.f(turn) <= 0.0 {
        return f64::INFINITY;
    }
    let s_max = (turn - start).abs().sqrt();
    let integrand = |s: f64| {
        let y = turn - sigma * s * s;
        let m = sigma * model.mean_rate(y, turn);
        if m > 0.0 {
            2.0 / m.sqrt()
        } else {
            f64::INFINITY
        }
    };
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-12,
        max_intervals: 4000,
    };
    let q = quadrature::integrate(integrand, 0.0, s_max, opts);
    let len = std::f64::consts::SQRT_2 * q.value;
    if !len.is_finite() || len > LENGTH_CAP {
        f64::INFINITY
    } else {
        len
    }
}

/// `L(α)`: length of the arc launched at `(0, sqrt(2α))` until it returns
/// to `w = 0`.
pub fn length_of_alpha(model: &ReactionModel, alpha: f64) -> Result<f64> {
    let f1 = model.f1();
    if !(alpha > 0.0 && alpha <= f1) {
        return Err(Error::Domain(format!("alpha = {alpha} outside (0, F(1)] = (0, {f1}]")));
    }
    if alpha == f1 {
        return Ok(f64::INFINITY);
    }
    let turn = model.f_inverse_upper(alpha)?;
    Ok(turning_length(model, 0.0, turn))
}

fn logit_grid() -> Vec<(f64, f64)> {
    // (t, 1 - t) pairs, both accurate near their respective ends
    (0..SCAN_POINTS)
        .map(|k| {
            let z = -SCAN_SPAN + 2.0 * SCAN_SPAN * k as f64 / (SCAN_POINTS - 1) as f64;
            let t = 1.0 / (1.0 + (-z).exp());
            let one_minus = 1.0 / (1.0 + z.exp());
            (t, one_minus)
        })
        .collect()
}

fn argmin(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) })
        .0
}

/// Scan `eval` on `ts` and refine the smallest value by golden section.
/// Returns `(t*, value, interior)`.
fn scan_and_refine<F: Fn(f64) -> f64>(eval: F, ts: &[f64]) -> (f64, f64, bool) {
    let vals: Vec<f64> = ts.iter().map(|&t| eval(t)).collect();
    let i = argmin(&vals);
    if i == 0 || i == ts.len() - 1 || !vals[i].is_finite() {
        return (ts[i], vals[i], false);
    }
    let (lo, hi) = (ts[i - 1], ts[i + 1]);
    let m = golden_section(&eval, lo, hi, (hi - lo) * 1e-10);
    if m.value < vals[i] {
        (m.x, m.value, true)
    } else {
        (ts[i], vals[i], true)
    }
}

/// `L* = inf_α L(α)`; `+inf` for a bistable model with `F(1) = 0`.
pub fn l_star(model: &ReactionModel) -> Result<Threshold> {
    let f1 = model.f1();
    if f1 == 0.0 {
        return Ok(Threshold::infinite());
    }
    let grid: Vec<f64> = logit_grid().into_iter().map(|(t, _)| t).collect();
    let eval = |t: f64| length_of_alpha(model, f1 * t).unwrap_or(f64::INFINITY);
    let (t, value, interior) = scan_and_refine(eval, &grid);
    if interior {
        return Ok(Threshold {
            value,
            attained: true,
            argmin: Some(f1 * t),
        });
    }
    if t < 0.5 {
        // infimum at α → 0: L(α) = L0 + c sqrt(α) + O(α)
        let a1 = f1 * 1e-8;
        let l1 = length_of_alpha(model, a1)?;
        let l2 = length_of_alpha(model, a1 / 4.0)?;
        let value = 2.0 * l2 - l1;
        return Ok(Threshold {
            value: value.min(l2),
            attained: false,
            argmin: Some(0.0),
        });
    }
    Ok(Threshold {
        value,
        attained: false,
        argmin: Some(f1 * t),
    })
}

/// `π / sqrt(max_{y∈(0,1]} f(y)/y)`, a lower bound for `L*`.
pub fn l_star_lower_bound(model: &ReactionModel) -> Result<f64> {
    let ratio = |y: f64| if y == 0.0 { model.f_prime(0.0) } else { model.f(y) / y };
    let r = sampled_max(ratio, 0.0, 1.0);
    if r <= 0.0 {
        return Err(Error::InvalidModel("max f(y)/y is not positive".into()));
    }
    Ok(PI / r.sqrt())
}

/// `π / sqrt(max_z |f(θ+z)/z|)`, the shifted analogue bounding `L_θ` from below.
pub fn l_theta_lower_bound(model: &ReactionModel) -> Result<f64> {
    let theta = model.require_theta()?;
    let ratio = |y: f64| {
        if y == theta {
            model.f_prime(theta).abs()
        } else {
            (model.f(y) / (y - theta)).abs()
        }
    };
    let r = sampled_max(ratio, 0.0, 1.0);
    Ok(PI / r.sqrt())
}

fn sampled_max<F: Fn(f64) -> f64>(g: F, a: f64, b: f64) -> f64 {
    const N: usize = 10_000;
    let ys: Vec<f64> = (0..=N).map(|i| a + (b - a) * i as f64 / N as f64).collect();
    let vals: Vec<f64> = ys.iter().map(|&y| g(y)).collect();
    let i = vals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0;
    let lo = ys[i.saturating_sub(1)];
    let hi = ys[(i + 1).min(N)];
    let m = golden_section(|y| -g(y), lo, hi, 1e-14);
    vals[i].max(-m.value)
}

/// `L_θ = inf_β √2 |∫_θ^β dy / sqrt(F(β) - F(y))|` over both branches
/// `β > θ` and `β < θ`.
pub fn l_theta(model: &ReactionModel) -> Result<Threshold> {
    let theta = model.require_theta()?;
    let grid = logit_grid();
    let mut best = Threshold::infinite();
    for upper in [true, false] {
        let beta = |t: f64| if upper { theta + (1.0 - theta) * t } else { theta - theta * t };
        let eval = |t: f64| turning_length(model, theta, beta(t));
        let ts: Vec<f64> = grid.iter().map(|&(t, _)| t).collect();
        let (t, mut value, interior) = scan_and_refine(eval, &ts);
        if !interior && t < 0.5 {
            // small-amplitude limit β → θ, linear in the amplitude
            let h = 1e-6;
            value = (2.0 * eval(h / 2.0) - eval(h)).min(eval(h / 2.0));
        }
        if value < best.value {
            best = Threshold {
                value,
                attained: interior,
                argmin: Some(if interior { beta(t) } else { theta }),
            };
        }
    }
    Ok(best)
}

/// `L^a`: shortest return length to level `a` among arcs starting at
/// `w(0) = a` with `sqrt(-2F(a)) ≤ w'(0) ≤ sqrt(2(F(1) - F(a)))`.
pub fn l_a(model: &ReactionModel, a: f64) -> Result<Threshold> {
    if model.kind() != ModelKind::Bistable {
        return Err(Error::NotBistable);
    }
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::Domain(format!("a = {a} outside [0,1]")));
    }
    let theta1 = model.theta1().expect("bistable model has θ₁");
    let beta_lo = if a <= theta1 { theta1 } else { a };
    if beta_lo >= 1.0 {
        return Ok(Threshold::infinite());
    }
    let beta = |t: f64| beta_lo + (1.0 - beta_lo) * t;
    let eval = |t: f64| turning_length(model, a, beta(t));
    let mut ts = vec![0.0];
    ts.extend(logit_grid().into_iter().map(|(t, _)| t));
    let (t, value, interior) = scan_and_refine(eval, &ts);
    Ok(Threshold {
        value,
        attained: value.is_finite() && (interior || t == 0.0),
        argmin: Some(beta(t)),
    })
}

/// Summary written by the `thresholds` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub model: String,
    pub kind: ModelKind,
    #[serde(with = "json_f64")]
    pub l_star: f64,
    pub attained: bool,
    pub argmin_alpha: Option<f64>,
    #[serde(with = "json_f64::option")]
    pub l_theta: Option<f64>,
    pub argmin_beta: Option<f64>,
    pub lower_bound: f64,
    pub l_theta_lower_bound: Option<f64>,
    pub f1: f64,
    pub theta: Option<f64>,
    pub theta1: Option<f64>,
}

impl ThresholdReport {
    pub fn compute(model: &ReactionModel) -> Result<Self> {
        let ls = l_star(model)?;
        let (lt, lt_bound) = if model.is_bistable() {
            (Some(l_theta(model)?), Some(l_theta_lower_bound(model)?))
        } else {
            (None, None)
        };
        Ok(Self {
            model: model.name().to_string(),
            kind: model.kind(),
            l_star: ls.value,
            attained: ls.attained,
            argmin_alpha: ls.argmin,
            l_theta: lt.map(|t| t.value),
            argmin_beta: lt.and_then(|t| t.argmin),
            lower_bound: l_star_lower_bound(model)?,
            l_theta_lower_bound: lt_bound,
            f1: model.f1(),
            theta: model.theta(),
            theta1: model.theta1(),
        })
    }
}
