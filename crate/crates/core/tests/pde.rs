use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rdcontrol::pde::{
    check_comparison, detect_convergence, ramp, reference_dt, simulate, simulate_with, step,
    ControlSchedule, Field, NoReaction, Scheme, Stepper,
};
use rdcontrol::phase_plane::find_stationary_solutions_on_grid;
use rdcontrol::{Error, ReactionModel};

fn cubic() -> ReactionModel {
    ReactionModel::cubic(1.0 / 3.0).unwrap()
}

fn mode_error(n_x: usize, scheme: Scheme) -> f64 {
    let l = 5.0;
    let dt = 1e-3;
    let y0 = Field::from_fn(l, n_x, |x| (PI * x / l).sin());
    let sched = ControlSchedule::constant(dt, 1000, 0.0, 0.0).unwrap();
    let tr = simulate_with(&NoReaction, &y0, &sched, 1000, scheme).unwrap();
    let decay = (-(PI / l).powi(2) * tr.final_time()).exp();
    let exact: Vec<f64> = y0.values.iter().map(|v| v * decay).collect();
    tr.last().max_distance(&exact)
}

#[test]
fn heat_mode_second_order_in_space() {
    let coarse = mode_error(100, Scheme::crank_nicolson());
    let fine = mode_error(200, Scheme::crank_nicolson());
    assert!(fine <= 1e-3);
    let ratio = coarse / fine;
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn backward_euler_heat_mode_is_close() {
    assert!(mode_error(200, Scheme::backward_euler()) <= 1e-3);
}

#[test]
fn stays_in_unit_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for m in [cubic(), ReactionModel::logistic()] {
        for _ in 0..10 {
            let l = rng.gen_range(1.0..15.0);
            let y0 = Field::new(l, (0..=80).map(|_| rng.gen::<f64>()).collect());
            let dt = reference_dt(&m);
            let n = 2000;
            let u: Vec<f64> = (0..n).map(|_| f64::from(rng.gen::<bool>() as u8)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let tr = simulate(&m, &y0, &ControlSchedule::new(dt, u, v).unwrap(), 50).unwrap();
            assert!(tr.max_violation <= 1e-10);
            for s in &tr.states {
                assert!(s.iter().all(|&y| (-1e-10..=1.0 + 1e-10).contains(&y)));
            }
        }
    }
}

#[test]
fn monotonicity_condition() {
    let m = cubic();
    let be = Stepper::new(&m, 8.0, 200, reference_dt(&m), Scheme::backward_euler()).unwrap();
    assert!(be.is_monotone());
    // Crank–Nicolson with mesh ratio far above 1/2
    let cn = Stepper::new(&m, 8.0, 200, 0.1, Scheme::crank_nicolson()).unwrap();
    assert!(cn.mesh_ratio() > 1.0 && !cn.is_monotone());
    let log = ReactionModel::logistic();
    assert_eq!(reference_dt(&log), 1e-3);
}

#[test]
fn boundary_values_follow_controls() {
    let m = cubic();
    let y = step(&m, &ramp(8.0, 50), 0.25, 0.75, 0.01).unwrap();
    assert_eq!(y.values[0], 0.25);
    assert_eq!(y.values[50], 0.75);
    assert!(matches!(step(&m, &ramp(8.0, 50), 1.5, 0.0, 0.01), Err(Error::Domain(_))));
}

#[test]
fn schedule_validation() {
    assert!(matches!(
        ControlSchedule::new(0.1, vec![0.0; 3], vec![0.0; 4]),
        Err(Error::DimensionMismatch(_))
    ));
    assert!(ControlSchedule::new(0.1, vec![1.2], vec![0.0]).is_err());
    assert!(ControlSchedule::new(0.0, vec![0.0], vec![0.0]).is_err());
    let mut a = ControlSchedule::constant(0.1, 3, 0.0, 1.0).unwrap();
    a.extend(&ControlSchedule::constant(0.1, 2, 1.0, 0.0).unwrap()).unwrap();
    assert_eq!(a.n_steps(), 5);
    assert!((a.horizon() - 0.5).abs() < 1e-15);
    assert!(a.extend(&ControlSchedule::constant(0.2, 1, 0.0, 0.0).unwrap()).is_err());
}

#[test]
fn recording_includes_final_state() {
    let m = cubic();
    let sched = ControlSchedule::constant(0.01, 105, 0.0, 0.0).unwrap();
    let tr = simulate(&m, &ramp(4.0, 40), &sched, 10).unwrap();
    assert_eq!(tr.len(), 12);
    assert!((tr.final_time() - 1.05).abs() < 1e-12);
    assert_eq!(tr.index_at(0.52), 5);
}

fn drift_per_unit_time(m: &ReactionModel, a: f64, l: f64, n_x: usize) -> Vec<f64> {
    let dt = reference_dt(m);
    let per_unit = (1.0 / dt).round() as usize;
    let mut out = Vec::new();
    for s in find_stationary_solutions_on_grid(m, a, a, l, n_x).unwrap() {
        let sched = ControlSchedule::constant(dt, 3 * per_unit, s.left_control, s.right_control).unwrap();
        let tr = simulate(m, &Field::new(l, s.values.clone()), &sched, per_unit).unwrap();
        let worst = tr
            .states
            .windows(2)
            .map(|w| Field::new(l, w[1].clone()).max_distance(&w[0]))
            .fold(0.0, f64::max);
        out.push(worst);
    }
    out
}

#[test]
fn steady_states_are_fixed_points() {
    let m = cubic();
    let small = drift_per_unit_time(&m, 0.02, 8.0, 200);
    assert_eq!(small.len(), 1);
    assert!(small[0] <= 1e-6, "{small:?}");
    // curved profiles differ from the discrete steady state by O(dx²)
    let bumps = drift_per_unit_time(&m, 0.0, 12.0, 800);
    assert!(bumps.len() >= 3);
    assert!(bumps.iter().all(|&d| d <= 1e-6), "{bumps:?}");
}

#[test]
fn constant_control_runs_settle() {
    let m = cubic();
    let th = 1.0 / 3.0;
    let dt = reference_dt(&m);
    let cases = [
        (3.0, 0.0, 0.0),
        (3.0, th, th),
        (3.0, 0.5, 0.1),
        (6.0, 0.0, 0.0),
        (6.0, 1.0, 0.0),
        (6.0, 0.5, 0.1),
        (8.0, 0.0, 0.0),
        (8.0, th, th),
        (8.0, 1.0, 1.0),
        (12.0, 0.0, 0.0),
        (12.0, th, th),
        (12.0, 1.0, 0.0),
    ];
    for (l, u, v) in cases {
        let sched = ControlSchedule::constant(dt, (200.0 / dt) as usize, u, v).unwrap();
        let tr = simulate(&m, &ramp(l, 200), &sched, 1000).unwrap();
        assert!(
            detect_convergence(&m, &tr, 20.0, 1e-8).is_some(),
            "L = {l}, controls ({u}, {v})"
        );
    }
}

#[test]
fn logistic_lyapunov_decreases() {
    let m = ReactionModel::logistic();
    let sched = ControlSchedule::constant(1e-3, 5000, 1.0, 1.0).unwrap();
    let tr = simulate(&m, &ramp(10.0, 200), &sched, 1).unwrap();
    let v = tr.lyapunov().unwrap();
    assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-6));
    assert!(v[v.len() - 1] < 1e-3 * v[0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ordered_data_stay_ordered(seed in any::<u64>(), l in 2.0f64..14.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = cubic();
        let low: Vec<f64> = (0..=40).map(|_| rng.gen::<f64>()).collect();
        let high: Vec<f64> = low.iter().map(|&a| a + rng.gen::<f64>() * (1.0 - a)).collect();
        let n = 300;
        let u: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let sched = ControlSchedule::new(reference_dt(&m), u, v).unwrap();
        let rep = check_comparison(&m, &Field::new(l, low), &Field::new(l, high), &sched, Scheme::default()).unwrap();
        prop_assert!(rep.monotone_step);
        prop_assert!(rep.max_gap <= 1e-8);
    }
}
