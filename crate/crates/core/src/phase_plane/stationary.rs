//! Integration of `w' = z, z' = -f(w)` and enumeration of stationary
//! solutions with prescribed boundary values by shooting on `w'(0)`.

use super::{PhasePoint, SteadyState};
use crate::error::{Error, Result};
use crate::reaction::ReactionModel;
use crate::scalar::{bisect, golden_section};

/// Number of initial slopes scanned by [`find_stationary_solutions`].
pub const SHOOTING_SAMPLES: usize = 2048;

const DEFAULT_GRID: usize = 256;
const EXIT_SLACK: f64 = 1e-9;
const RICHARDSON_TOL: f64 = 1e-9;
const SHOOT_STEP: f64 = 0.005;

// fourth-order symmetric composition of Störmer–Verlet
const CBRT2: f64 = 1.259_921_049_894_873_2;
const YOSHIDA_OUTER: f64 = 1.0 / (2.0 - CBRT2);
const YOSHIDA_INNER: f64 = 1.0 - 2.0 * YOSHIDA_OUTER;

/// Result of integrating the stationary ODE over `[0, L]`.
#[derive(Debug, Clone)]
pub enum Integration {
    /// The arc stays in `[0, 1]` on the whole interval.
    Inside(SteadyState),
    /// The arc leaves `[0, 1]` at `x`.
    Exited { x: f64, point: PhasePoint },
}

impl Integration {
    pub fn inside(self) -> Option<SteadyState> {
        match self {
            Integration::Inside(s) => Some(s),
            Integration::Exited { .. } => None,
        }
    }
}

#[inline]
fn verlet(model: &ReactionModel, w: &mut f64, z: &mut f64, h: f64) {
    *z -= 0.5 * h * model.f(*w);
    *w += h * *z;
    *z -= 0.5 * h * model.f(*w);
}

#[inline]
fn yoshida(model: &ReactionModel, w: &mut f64, z: &mut f64, h: f64) {
    verlet(model, w, z, YOSHIDA_OUTER * h);
    verlet(model, w, z, YOSHIDA_INNER * h);
    verlet(model, w, z, YOSHIDA_OUTER * h);
}

#[inline]
fn outside(w: f64) -> bool {
    !(-EXIT_SLACK..=1.0 + EXIT_SLACK).contains(&w)
}

struct Run {
    w: Vec<f64>,
    z: Vec<f64>,
    exit: Option<(f64, PhasePoint)>,
}

fn run(model: &ReactionModel, init: PhasePoint, length: f64, n: usize, substeps: usize) -> Run {
    let h = length / (n * substeps) as f64;
    let (mut w, mut z) = (init.w, init.wp);
    let mut ws = Vec::with_capacity(n + 1);
    let mut zs = Vec::with_capacity(n + 1);
    ws.push(w);
    zs.push(z);
    if outside(w) {
        return Run {
            w: ws,
            z: zs,
            exit: Some((0.0, init)),
        };
    }
    for i in 0..n {
        for k in 0..substeps {
            yoshida(model, &mut w, &mut z, h);
            if outside(w) || !w.is_finite() {
                let x = ((i * substeps + k + 1) as f64) * h;
                return Run {
                    w: ws,
                    z: zs,
                    exit: Some((x, PhasePoint::new(w, z))),
                };
            }
        }
        ws.push(w);
        zs.push(z);
    }
    Run {
        w: ws,
        z: zs,
        exit: None,
    }
}

/// Integrate the stationary ODE from `init` over `[0, L]`, sampling `n + 1`
/// points. Substeps are doubled until two consecutive resolutions agree to
/// `1e-9` in max norm.
pub fn integrate_stationary(
    model: &ReactionModel,
    init: PhasePoint,
    length: f64,
    n: usize,
) -> Result<Integration> {
    if !(length > 0.0) {
        return Err(Error::Domain(format!("length must be positive, got {length}")));
    }
    if n < 64 {
        return Err(Error::Domain(format!("grid needs at least 64 intervals, got {n}")));
    }
    let h_out = length / n as f64;
    let mut m = ((h_out / 0.02).ceil() as usize).max(1);
    let mut coarse = run(model, init, length, n, m);
    loop {
        let fine = run(model, init, length, n, 2 * m);
        match (&coarse.exit, &fine.exit) {
            (None, None) => {
                let diff = coarse
                    .w
                    .iter()
                    .zip(&fine.w)
                    .chain(coarse.z.iter().zip(&fine.z))
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if diff <= RICHARDSON_TOL {
                    return Ok(Integration::Inside(to_state(model, init, length, fine)));
                }
            }
            (Some(_), Some((x, p))) => {
                return Ok(Integration::Exited { x: *x, point: *p });
            }
            _ => {}
        }
        m *= 2;
        if h_out / (m as f64) < 1e-6 {
            return match fine.exit {
                Some((x, p)) => Ok(Integration::Exited { x, point: p }),
                None => Err(Error::StepFailure(format!(
                    "no agreement to {RICHARDSON_TOL:e} from init ({}, {}) over L = {length}",
                    init.w, init.wp
                ))),
            };
        }
        coarse = fine;
    }
}

fn to_state(model: &ReactionModel, init: PhasePoint, length: f64, r: Run) -> SteadyState {
    let n = r.w.len() - 1;
    let values: Vec<f64> = r.w.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    SteadyState {
        length,
        grid: (0..=n).map(|j| j as f64 * length / n as f64).collect(),
        left_control: values[0],
        right_control: values[n],
        values,
        slopes: r.z,
        init,
        energy: 0.5 * init.wp * init.wp + model.primitive(init.w),
        low_confidence: false,
    }
}

/// Shooting residual `w(L) - b`; arcs that leave `[0,1]` are continued
/// linearly from the exit point so the map stays continuous across exits.
fn shoot(model: &ReactionModel, a: f64, p: f64, b: f64, length: f64) -> f64 {
    let steps = ((length / SHOOT_STEP).ceil() as usize).max(1);
    let h = length / steps as f64;
    let (mut w, mut z) = (a, p);
    for k in 0..steps {
        yoshida(model, &mut w, &mut z, h);
        if outside(w) {
            let x = (k + 1) as f64 * h;
            return w + z * (length - x) - b;
        }
    }
    w - b
}

/// All solutions `0 ≤ w ≤ 1` of `-w'' = f(w)`, `w(0) = a`, `w(L) = b`,
/// sampled on a 256-interval grid.
pub fn find_stationary_solutions(
    model: &ReactionModel,
    a: f64,
    b: f64,
    length: f64,
) -> Result<Vec<SteadyState>> {
    find_stationary_solutions_on_grid(model, a, b, length, DEFAULT_GRID)
}

/// [`find_stationary_solutions`] with an explicit number of grid intervals.
pub fn find_stationary_solutions_on_grid(
    model: &ReactionModel,
    a: f64,
    b: f64,
    length: f64,
    n: usize,
) -> Result<Vec<SteadyState>> {
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
        return Err(Error::Domain(format!("boundary values ({a}, {b}) outside [0,1]")));
    }
    if !(length > 0.0) {
        return Err(Error::Domain(format!("length must be positive, got {length}")));
    }
    let span = (2.0 * (model.f1() - model.primitive(a))).max(0.0).sqrt();
    let g = |p: f64| shoot(model, a, p, b, length);

    let mut roots: Vec<(f64, bool)> = Vec::new();
    if span == 0.0 {
        if g(0.0).abs() <= 1e-9 {
            roots.push((0.0, false));
        }
    } else {
        let ps: Vec<f64> = (0..SHOOTING_SAMPLES)
            .map(|i| -span + 2.0 * span * i as f64 / (SHOOTING_SAMPLES - 1) as f64)
            .collect();
        let gs: Vec<f64> = ps.iter().map(|&p| g(p)).collect();
        for i in 0..ps.len() - 1 {
            if gs[i] == 0.0 {
                roots.push((ps[i], false));
            } else if gs[i].signum() != gs[i + 1].signum() && gs[i + 1] != 0.0 {
                if let Some(r) = bisect(g, ps[i], ps[i + 1], 1e-10) {
                    roots.push((r, false));
                }
            }
        }
        if *gs.last().unwrap() == 0.0 {
            roots.push((*ps.last().unwrap(), false));
        }
        // tangential zeros: local minima of |g| without a sign change
        for i in 1..ps.len() - 1 {
            let (l, c, r) = (gs[i - 1], gs[i], gs[i + 1]);
            let same = l.signum() == c.signum() && c.signum() == r.signum();
            if same && c.abs() < l.abs() && c.abs() <= r.abs() && c.abs() < 1e-3 {
                let m = golden_section(|p| g(p).abs(), ps[i - 1], ps[i + 1], 1e-12);
                if m.value <= 1e-7 {
                    roots.push((m.x, true));
                }
            }
        }
    }

    let n_grid = n.max(64);
    let mut out: Vec<SteadyState> = Vec::new();
    // exact constant solutions take precedence over nearby numerical roots
    let equilibria = [Some(0.0), model.theta(), Some(1.0)];
    if a == b && equilibria.contains(&Some(a)) {
        out.push(SteadyState::constant(model, a, length, n_grid));
    }
    for (p, tangential) in roots {
        if out.iter().any(|s| (s.init.wp - p).abs() < 1e-7) {
            continue;
        }
        let Integration::Inside(mut s) =
            integrate_stationary(model, PhasePoint::new(a, p), length, n_grid)?
        else {
            continue;
        };
        let last = s.n_intervals();
        if (s.values[last] - b).abs() > 1e-6 {
            continue;
        }
        s.values[last] = b;
        s.right_control = b;
        s.low_confidence = tangential;
        out.push(s);
    }

    out.sort_by(|x, y| x.init.wp.total_cmp(&y.init.wp));
    Ok(out)
}
