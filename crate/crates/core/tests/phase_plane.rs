use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rdcontrol::phase_plane::{
    build_path_to_theta, energy, find_stationary_solutions, in_gamma, integrate_stationary, l_a,
    l_star, l_star_lower_bound, l_theta, l_theta_lower_bound, length_of_alpha, Integration,
};
use rdcontrol::{PhasePoint, ReactionModel};

fn cubic() -> ReactionModel {
    ReactionModel::cubic(1.0 / 3.0).unwrap()
}

#[test]
fn logistic_length_limits() {
    let m = ReactionModel::logistic();
    let small = length_of_alpha(&m, 1e-10).unwrap();
    assert!((small - std::f64::consts::PI).abs() < 1e-3, "{small}");
    assert!(length_of_alpha(&m, m.f1()).unwrap().is_infinite());
    assert!(length_of_alpha(&m, -1.0).is_err());
}

#[test]
fn cubic_length_above_threshold() {
    let m = cubic();
    let l = length_of_alpha(&m, 0.9 * m.f1()).unwrap();
    assert!(l.is_finite() && l >= l_star(&m).unwrap().value);
}

#[test]
fn degenerate_cubic_has_infinite_threshold() {
    let m = ReactionModel::cubic(0.5).unwrap();
    assert!(l_star(&m).unwrap().value.is_infinite());
}

#[test]
fn lower_bounds() {
    let m = cubic();
    let lb = l_star_lower_bound(&m).unwrap();
    assert!((lb - 3.0 * std::f64::consts::PI).abs() < 1e-6);
    let lt = l_theta(&m).unwrap().value;
    assert!(l_theta_lower_bound(&m).unwrap() <= lt + 1e-4);
    assert!(lt < l_star(&m).unwrap().value);
    assert!(l_theta(&ReactionModel::logistic()).is_err());
}

#[test]
fn monostable_length_nondecreasing() {
    let m = ReactionModel::logistic();
    let mut prev = 0.0;
    for k in 1..=256 {
        let alpha = m.f1() * k as f64 / 257.0;
        let l = length_of_alpha(&m, alpha).unwrap();
        assert!(l >= prev - 1e-9, "decrease at α = {alpha}");
        prev = l;
    }
}

#[test]
fn l_a_endpoints() {
    let m = cubic();
    let ls = l_star(&m).unwrap().value;
    assert!((l_a(&m, 0.0).unwrap().value - ls).abs() < 1e-4);
    let mut prev = 0.0;
    for eps in [0.08, 0.04, 0.02, 0.01] {
        let v = l_a(&m, eps).unwrap().value;
        assert!(v < ls && v > prev, "L^{eps} = {v}");
        prev = v;
    }
    // L^θ only counts arcs outside the homoclinic region, L_θ does not
    let at_theta = l_a(&m, 1.0 / 3.0).unwrap().value;
    assert!((at_theta - l_theta(&m).unwrap().value).abs() < 1e-2, "{at_theta}");
    assert!(l_a(&m, 1.5).is_err());
}

#[test]
fn gamma_membership() {
    let m = cubic();
    assert!(in_gamma(&m, PhasePoint::new(1.0 / 3.0, 0.0)).unwrap());
    assert!(!in_gamma(&m, PhasePoint::new(0.0, 0.01)).unwrap());
    let w: f64 = 0.2;
    assert!(in_gamma(&m, PhasePoint::new(w, (-2.0 * m.primitive(w)).sqrt())).unwrap());
    assert!(in_gamma(&m, PhasePoint::new(0.9, 0.0)).is_err());
}

#[test]
fn equilibrium_integrates_to_constant() {
    let m = cubic();
    let s = integrate_stationary(&m, PhasePoint::new(1.0 / 3.0, 0.0), 10.0, 256)
        .unwrap()
        .inside()
        .unwrap();
    assert!(s.values.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-14));
}

#[test]
fn homoclinic_energy_conserved() {
    let m = cubic();
    let w0 = 0.2;
    let p = PhasePoint::new(w0, (-2.0 * m.primitive(w0)).sqrt());
    if let Integration::Inside(s) = integrate_stationary(&m, p, 6.0, 512).unwrap() {
        assert!(s.energy_drift(&m) <= 1e-8);
        assert!(s.energy.abs() < 1e-12);
    } else {
        panic!("homoclinic arc left [0,1]");
    }
}

#[test]
fn return_arc_is_symmetric() {
    let m = cubic();
    let alpha = 0.6 * m.f1();
    let l = length_of_alpha(&m, alpha).unwrap();
    let n = 2048;
    let s = integrate_stationary(&m, PhasePoint::new(0.0, (2.0 * alpha).sqrt()), l, n)
        .unwrap()
        .inside()
        .unwrap();
    assert!(s.values[n].abs() < 1e-7, "w(L) = {}", s.values[n]);
    let peak = (0..=n).max_by(|&a, &b| s.values[a].total_cmp(&s.values[b])).unwrap();
    assert!(peak.abs_diff(n / 2) <= 1, "peak at {peak}");
    assert!(s.slopes[n / 2].abs() < 1e-3);
    assert!((s.values[n / 2] - m.f_inverse_upper(alpha).unwrap()).abs() < 1e-6);
}

#[test]
fn stencil_residual_of_bump() {
    let m = cubic();
    // the stencil amplifies sample error by 4/dx², so finer is not better
    let n = 1024;
    let sols = find_stationary_solutions(&m, 0.0, 0.0, 12.0).unwrap();
    let bump = sols.iter().find(|s| s.values.iter().any(|&v| v > 0.5)).unwrap();
    let fine = integrate_stationary(&m, bump.init, 12.0, n).unwrap().inside().unwrap();
    assert!(fine.residual(&m) <= 1e-6, "{}", fine.residual(&m));
    assert!(fine.energy_drift(&m) <= 1e-8);
    assert!(fine.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
}

#[test]
fn stationary_enumeration() {
    let m = cubic();
    let ones = find_stationary_solutions(&m, 1.0, 1.0, 7.0).unwrap();
    assert_eq!(ones.len(), 1);
    assert!(ones[0].values.iter().all(|&v| (v - 1.0).abs() < 1e-12));

    let zeros = find_stationary_solutions(&m, 0.0, 0.0, 8.0).unwrap();
    assert_eq!(zeros.len(), 1);
    assert!(zeros[0].values.iter().all(|&v| v.abs() < 1e-12));

    let long = find_stationary_solutions(&m, 0.0, 0.0, 12.0).unwrap();
    assert!(long.len() >= 2);
    assert!(long.iter().any(|s| s.values.iter().all(|&v| v == 0.0)));
    assert!(long.iter().any(|s| s.values.iter().any(|&v| v > 0.1)));
}

#[test]
fn unique_solution_near_zero() {
    let m = cubic();
    for eps in [0.005, 0.01, 0.02] {
        let sols = find_stationary_solutions(&m, eps, eps, 8.0).unwrap();
        assert_eq!(sols.len(), 1, "ε = {eps}");
        assert!(in_gamma(&m, sols[0].init).unwrap());
    }
}

#[test]
fn gamma_is_trapping() {
    let m = cubic();
    let theta1 = m.theta1().unwrap();
    let span = 10.0 * l_star(&m).unwrap().value;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let w = rng.gen_range(1e-3..theta1 - 1e-3);
        let wp = rng.gen_range(-0.999..0.999) * (-2.0 * m.primitive(w)).sqrt();
        let p = PhasePoint::new(w, wp);
        assert!(in_gamma(&m, p).unwrap());
        let s = integrate_stationary(&m, p, span, 4096).unwrap().inside().unwrap();
        assert!(s.values.iter().all(|&v| v >= 0.0 && v <= theta1 + 1e-9));
    }
}

#[test]
fn path_to_theta() {
    let m = cubic();
    let theta = 1.0 / 3.0;
    let eps = 0.02;
    let sols = find_stationary_solutions(&m, eps, eps, 10.0).unwrap();
    let init = sols.iter().find(|s| in_gamma(&m, s.init).unwrap()).unwrap();
    let path = build_path_to_theta(&m, init, 10.0, 64, 0.02).unwrap();
    let (u0, v0) = path.controls[0];
    assert!((u0 - eps).abs() < 1e-12 && (v0 - eps).abs() < 1e-8);
    let last = path.states.last().unwrap();
    assert!(last.values.iter().all(|&v| v == theta));
    assert!(path.controls.iter().all(|&(u, v)| u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0));
    assert!(path.controls.iter().any(|&(_, v)| v > theta));
    assert!(path.max_gap <= 0.02);
    for w in path.states.windows(2) {
        assert!(w[0].max_distance(&w[1].values) <= 0.02);
    }
    // lengths beyond the threshold are rejected
    assert!(build_path_to_theta(&m, init, 11.0, 64, 0.02).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn energy_is_conserved(w in 0.05f64..0.5, frac in -0.9f64..0.9) {
        let m = cubic();
        let p = PhasePoint::new(w, frac * (-2.0 * m.primitive(w)).sqrt());
        let s = integrate_stationary(&m, p, 8.0, 256).unwrap().inside().unwrap();
        prop_assert!(s.energy_drift(&m) <= 1e-8);
        prop_assert!((s.energy - energy(&m, p)).abs() < 1e-15);
    }
}
