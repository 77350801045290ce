//! One-dimensional bracketing tools: golden-section minimization and
//! bisection root finding.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimum of a unimodal function located on `[a, b]`.
#[derive(Debug, Clone, Copy)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Golden-section search on `[a, b]` until the bracket is narrower than
/// `x_tol`. Non-finite function values are treated as `+inf`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, x_tol: f64) -> Minimum {
    let mut eval = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = eval(x1);
    let mut f2 = eval(x2);
    let mut evaluations = 2;
    while hi - lo > x_tol && evaluations < 400 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = eval(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = eval(x2);
        }
        evaluations += 1;
    }
    if f1 <= f2 {
        Minimum {
            x: x1,
            value: f1,
            evaluations,
        }
    } else {
        Minimum {
            x: x2,
            value: f2,
            evaluations,
        }
    }
}

/// Bisection for a sign change of `f` on `[a, b]`. Returns `None` when the
/// endpoint values do not bracket a root.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, x_tol: f64) -> Option<f64> {
    let (mut lo, mut hi) = (a, b);
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= x_tol || mid == lo || mid == hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Some(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_vertex() {
        let m = golden_section(|x| (x - 0.3).powi(2) + 1.0, -2.0, 5.0, 1e-10);
        // flat minimum: x is resolved only to about sqrt(eps)
        assert!((m.x - 0.3).abs() < 1e-6);
        assert!((m.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_none());
    }
}
