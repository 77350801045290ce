//! Reaction nonlinearities `f` on `[0, 1]`, their primitive `F`, and the
//! monostable / bistable classification.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, QuadOptions};
use crate::scalar;

/// Number of interior samples used for sign classification.
pub const CLASSIFY_SAMPLES: usize = 10_000;

const ENDPOINT_TOL: f64 = 1e-12;
const ZERO_F1_TOL: f64 = 1e-13;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    /// `f > 0` on `(0, 1)` and `f'(0) > 0`.
    Monostable,
    /// `f < 0` on `(0, θ)`, `f > 0` on `(θ, 1)`, `f'(0) < 0`, `f'(1) < 0`.
    Bistable,
}

/// Built-in models as they appear in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    /// `f(y) = y (1 - y)`
    Logistic {},
    /// `f(y) = y (1 - y) (y - θ)`
    Cubic { theta: f64 },
}

#[derive(Clone)]
enum Nonlinearity {
    /// Coefficients of `f` and `f'` in ascending powers of `y`.
    Polynomial(Vec<f64>, Vec<f64>),
    Custom { f: ScalarFn, f_prime: ScalarFn },
}

/// A validated reaction term. Immutable after construction.
#[derive(Clone)]
pub struct ReactionModel {
    name: String,
    spec: Option<ModelSpec>,
    nonlinearity: Nonlinearity,
    kind: ModelKind,
    theta: Option<f64>,
    theta1: Option<f64>,
    f1: f64,
    lipschitz: f64,
}

impl fmt::Debug for ReactionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReactionModel")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("theta", &self.theta)
            .field("theta1", &self.theta1)
            .field("f1", &self.f1)
            .finish()
    }
}

fn horner(coeffs: &[f64], y: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * y + c)
}

impl Nonlinearity {
    fn polynomial(coeffs: Vec<f64>) -> Self {
        let d = coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, ck)| k as f64 * ck)
            .collect();
        Nonlinearity::Polynomial(coeffs, d)
    }

    fn eval(&self, y: f64) -> f64 {
        match self {
            Nonlinearity::Polynomial(c, _) => horner(c, y),
            Nonlinearity::Custom { f, .. } => f(y),
        }
    }

    fn eval_prime(&self, y: f64) -> f64 {
        match self {
            Nonlinearity::Polynomial(_, d) => horner(d, y),
            Nonlinearity::Custom { f_prime, .. } => f_prime(y),
        }
    }

    fn primitive(&self, y: f64) -> f64 {
        match self {
            Nonlinearity::Polynomial(c, _) => {
                let mut acc = 0.0;
                for (k, ck) in c.iter().enumerate().rev() {
                    acc = acc * y + ck / (k + 1) as f64;
                }
                acc * y
            }
            Nonlinearity::Custom { f, .. } => {
                let opts = QuadOptions {
                    abs_tol: 1e-15,
                    rel_tol: 1e-12,
                    max_intervals: 500,
                };
                quadrature::integrate(|z| f(z), 0.0, y, opts).value
            }
        }
    }

    fn mean_rate(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return self.eval(a);
        }
        match self {
            Nonlinearity::Polynomial(c, _) => {
                // (F(b) - F(a)) / (b - a) = sum_k c_k/(k+1) * h_k(a, b), where
                // h_k is the complete homogeneous polynomial of degree k.
                let mut h = 1.0;
                let mut a_pow = 1.0;
                let mut acc = 0.0;
                for (k, ck) in c.iter().enumerate() {
                    if k > 0 {
                        a_pow *= a;
                        h = b * h + a_pow;
                    }
                    acc += ck / (k + 1) as f64 * h;
                }
                acc
            }
            Nonlinearity::Custom { f, .. } => {
                let opts = QuadOptions {
                    abs_tol: 1e-15 * (b - a).abs(),
                    rel_tol: 1e-12,
                    max_intervals: 500,
                };
                quadrature::integrate(|z| f(z), a, b, opts).value / (b - a)
            }
        }
    }
}

impl ReactionModel {
    /// `f(y) = y (1 - y)`.
    pub fn logistic() -> Self {
        let mut m = Self::from_nonlinearity(
            "logistic".into(),
            Nonlinearity::polynomial(vec![0.0, 1.0, -1.0]),
            None,
        )
        .expect("logistic model is valid");
        m.spec = Some(ModelSpec::Logistic {});
        m
    }

    /// `f(y) = y (1 - y) (y - θ)`; requires `0 < θ ≤ 1/2` so that `F(1) ≥ 0`.
    pub fn cubic(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidModel(format!(
                "cubic threshold must lie in (0,1), got {theta}"
            )));
        }
        // y(1-y)(y-θ) = -θ y + (1+θ) y² - y³
        let mut m = Self::from_nonlinearity(
            format!("cubic(theta={theta})"),
            Nonlinearity::polynomial(vec![0.0, -theta, 1.0 + theta, -1.0]),
            Some(theta),
        )?;
        m.spec = Some(ModelSpec::Cubic { theta });
        Ok(m)
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        match *spec {
            ModelSpec::Logistic {} => Ok(Self::logistic()),
            ModelSpec::Cubic { theta } => Self::cubic(theta),
        }
    }

    /// Polynomial nonlinearity given by ascending coefficients of `f`.
    pub fn polynomial(name: &str, coeffs: Vec<f64>, theta_hint: Option<f64>) -> Result<Self> {
        Self::from_nonlinearity(name.into(), Nonlinearity::polynomial(coeffs), theta_hint)
    }

    /// Validate a user-supplied nonlinearity. `F` is then evaluated by
    /// adaptive quadrature.
    pub fn classify(f: ScalarFn, f_prime: ScalarFn, theta_hint: Option<f64>) -> Result<Self> {
        Self::from_nonlinearity("custom".into(), Nonlinearity::Custom { f, f_prime }, theta_hint)
    }

    fn from_nonlinearity(
        name: String,
        nl: Nonlinearity,
        theta_hint: Option<f64>,
    ) -> Result<Self> {
        let f0 = nl.eval(0.0);
        let f1_val = nl.eval(1.0);
        if f0.abs() > ENDPOINT_TOL || f1_val.abs() > ENDPOINT_TOL {
            return Err(Error::InvalidModel(format!(
                "f must vanish at 0 and 1 (f(0)={f0:e}, f(1)={f1_val:e})"
            )));
        }

        let n = CLASSIFY_SAMPLES;
        let ys: Vec<f64> = (1..n).map(|i| i as f64 / n as f64).collect();
        let vals: Vec<f64> = ys.iter().map(|&y| nl.eval(y)).collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("f is not finite on [0,1]".into()));
        }

        let kind;
        let mut theta = None;
        if vals.iter().all(|&v| v > 0.0) {
            let d0 = nl.eval_prime(0.0);
            if d0 <= 0.0 {
                return Err(Error::InvalidModel(format!(
                    "monostable model needs f'(0) > 0, got {d0}"
                )));
            }
            kind = ModelKind::Monostable;
        } else {
            // negative block, at most one zero sample, then positive block
            let first_nonneg = vals.iter().position(|&v| v >= 0.0).ok_or_else(|| {
                Error::InvalidModel("f has no positive part on (0,1)".into())
            })?;
            let mut rest = first_nonneg;
            if vals[rest] == 0.0 {
                rest += 1;
            }
            let neg_ok = first_nonneg > 0 && vals[..first_nonneg].iter().all(|&v| v < 0.0);
            let pos_ok = rest < vals.len() && vals[rest..].iter().all(|&v| v > 0.0);
            if !(neg_ok && pos_ok) {
                return Err(Error::InvalidModel(
                    "f satisfies neither the monostable nor the bistable sign pattern".into(),
                ));
            }
            let d0 = nl.eval_prime(0.0);
            let d1 = nl.eval_prime(1.0);
            if d0 >= 0.0 || d1 >= 0.0 {
                return Err(Error::InvalidModel(format!(
                    "bistable model needs f'(0) < 0 and f'(1) < 0, got {d0} and {d1}"
                )));
            }
            let lo = ys[first_nonneg - 1];
            let hi = ys[rest.min(ys.len() - 1)];
            let th = match theta_hint {
                Some(h) if h >= lo && h <= hi && nl.eval(h).abs() <= 1e-14 => h,
                _ => scalar::bisect(|y| nl.eval(y), lo, hi, 1e-16).ok_or_else(|| {
                    Error::InvalidModel("could not bracket the interior zero".into())
                })?,
            };
            theta = Some(th);
            kind = ModelKind::Bistable;
        }

        let f1 = nl.primitive(1.0);
        if f1 < -ZERO_F1_TOL {
            return Err(Error::InvalidModel(format!(
                "F(1) = {f1:e} < 0; substitute z = 1 - y to obtain F(1) >= 0"
            )));
        }
        let f1 = if f1.abs() <= ZERO_F1_TOL { 0.0 } else { f1 };

        let theta1 = match (kind, theta) {
            (ModelKind::Bistable, Some(th)) => {
                if f1 == 0.0 {
                    Some(1.0)
                } else {
                    let t1 = scalar::bisect(|y| nl.primitive(y), th, 1.0, 1e-16).ok_or_else(
                        || Error::InvalidModel("F has no zero on (θ,1]".into()),
                    )?;
                    if nl.primitive(t1).abs() > 1e-10 || t1 <= th {
                        return Err(Error::InvalidModel("θ₁ failed validation".into()));
                    }
                    Some(t1)
                }
            }
            _ => None,
        };

        let lipschitz = (0..=n)
            .map(|i| nl.eval_prime(i as f64 / n as f64).abs())
            .fold(0.0, f64::max);

        Ok(Self {
            name,
            spec: None,
            nonlinearity: nl,
            kind,
            theta,
            theta1,
            f1,
            lipschitz,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Config representation, for the built-in models.
    pub fn spec(&self) -> Option<ModelSpec> {
        self.spec
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn is_bistable(&self) -> bool {
        self.kind == ModelKind::Bistable
    }

    /// Interior zero of `f` (bistable only).
    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    /// Zero of `F` on `(θ, 1]` (bistable only).
    pub fn theta1(&self) -> Option<f64> {
        self.theta1
    }

    pub(crate) fn require_theta(&self) -> Result<f64> {
        self.theta.ok_or(Error::NotBistable)
    }

    /// `F(1)`.
    pub fn f1(&self) -> f64 {
        self.f1
    }

    /// `max |f'|` on `[0, 1]` (sampled).
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    #[inline]
    pub fn f(&self, y: f64) -> f64 {
        self.nonlinearity.eval(y)
    }

    #[inline]
    pub fn f_prime(&self, y: f64) -> f64 {
        self.nonlinearity.eval_prime(y)
    }

    /// `F(y)` without the domain check.
    pub fn primitive(&self, y: f64) -> f64 {
        self.nonlinearity.primitive(y)
    }

    /// `F(y) = ∫_0^y f`, exact for polynomial models.
    pub fn big_f(&self, y: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::Domain(format!("F evaluated outside [0,1] at {y}")));
        }
        Ok(self.primitive(y))
    }

    /// `(F(b) - F(a)) / (b - a)`, evaluated without cancellation; `f(a)` when
    /// `a == b`.
    pub fn mean_rate(&self, a: f64, b: f64) -> f64 {
        self.nonlinearity.mean_rate(a, b)
    }

    /// Lower end of the increasing branch of `F` used by [`Self::f_inverse_upper`].
    pub fn upper_branch_start(&self) -> f64 {
        match self.kind {
            ModelKind::Monostable => 0.0,
            ModelKind::Bistable => self.theta1.unwrap_or(1.0),
        }
    }

    /// Inverse of `F` on its increasing branch (`[0,1]` for monostable,
    /// `[θ₁,1]` for bistable models).
    pub fn f_inverse_upper(&self, alpha: f64) -> Result<f64> {
        if !(0.0..=self.f1).contains(&alpha) {
            return Err(Error::Domain(format!(
                "alpha = {alpha} outside [0, F(1)] = [0, {}]",
                self.f1
            )));
        }
        let start = self.upper_branch_start();
        if alpha == 0.0 {
            return Ok(start);
        }
        if alpha == self.f1 {
            return Ok(1.0);
        }
        let (mut lo, mut hi) = (start, 1.0);
        // initial guess from the quadratic behaviour near the branch start
        let slope = self.f(start).max(0.0);
        let mut y = if slope > 0.0 {
            start + alpha / slope
        } else {
            start + (2.0 * alpha / self.f_prime(start).abs().max(1e-12)).sqrt()
        };
        if !(y > lo && y < hi) {
            y = 0.5 * (lo + hi);
        }
        for _ in 0..200 {
            let r = self.primitive(y) - alpha;
            if r == 0.0 {
                return Ok(y);
            }
            if r < 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            let d = self.f(y);
            let mut next = if d > 0.0 { y - r / d } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - y).abs() <= 1e-16 * y.abs().max(1e-300) || hi - lo <= 1e-16 {
                y = next;
                break;
            }
            y = next;
        }
        Ok(y)
    }
}
