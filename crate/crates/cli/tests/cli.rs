use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdcontrol"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &TempDir, text: &str) -> String {
    let p = dir.path().join("cfg.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn thresholds_report() {
    let dir = TempDir::new().unwrap();
    let out = run(&["thresholds"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = json(&dir.path().join("thresholds.json"));
    assert!((r["l_star"].as_f64().unwrap() - 10.43).abs() < 0.05);
    assert!((r["l_theta"].as_f64().unwrap() - 6.29).abs() < 0.05);
    assert_eq!(r["attained"], Value::Bool(true));

    let cfg = write_config(&dir, "[model]\nkind = \"logistic\"\n");
    let out = run(&["thresholds", "--config", &cfg], &dir.path().join("log"));
    assert_eq!(out.status.code(), Some(0));
    let r = json(&dir.path().join("log/thresholds.json"));
    assert!((r["l_star"].as_f64().unwrap() - std::f64::consts::PI).abs() < 1e-3);
    assert_eq!(r["attained"], Value::Bool(false));
    assert!(r["l_theta"].is_null());

    let cfg = write_config(&dir, "[model]\nkind = \"cubic\"\ntheta = 0.5\n");
    run(&["thresholds", "--config", &cfg], &dir.path().join("half"));
    let r = json(&dir.path().join("half/thresholds.json"));
    assert_eq!(r["l_star"], Value::String("inf".into()));
}

#[test]
fn simulate_cas1() {
    let dir = TempDir::new().unwrap();
    let out = run(&["simulate", "--preset", "cas1"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&dir.path().join("outcome.json"));
    assert!(r["final_error"].as_f64().unwrap() <= 1e-2);
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,x,y\n"));
    let sched = fs::read_to_string(dir.path().join("schedule.csv")).unwrap();
    assert!(sched.starts_with("t,u,v\n"));
    assert_eq!(sched.lines().count(), 401);
    let plot = fs::read_to_string(dir.path().join("plot_data.csv")).unwrap();
    let mut times: Vec<&str> = plot.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    times.dedup();
    assert_eq!(times, ["0", "5", "10", "15", "20"]);
}

#[test]
fn static_failure_exits_three() {
    let dir = TempDir::new().unwrap();
    let out = run(&["simulate", "--preset", "cas2"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("outcome.json").exists());
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[domain]\nlength = 5\n\n[simulate]\nt_final = 1\nsteps = 3\n");
    let out = run(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 6") && err.contains("steps"), "{err}");

    let cfg = write_config(&dir, "[simulate]\nu = 2.0\n");
    assert_eq!(run(&["simulate", "--config", &cfg], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--preset", "nope"], dir.path()).status.code(), Some(2));
    assert_eq!(
        run(&["simulate", "--config", "/nonexistent/cfg.toml"], dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn infeasible_staircase_exits_three() {
    let dir = TempDir::new().unwrap();
    let out = run(&["staircase", "--L", "12"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn staircase_at_eight() {
    let dir = TempDir::new().unwrap();
    let out = run(&["staircase", "--L", "8"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&dir.path().join("outcome.json"));
    assert_eq!(r["success"], Value::Bool(true));
    assert!(r["final_error"].as_f64().unwrap() <= 1e-2);
    assert_eq!(r["schedule_csv_path"], Value::String("schedule.csv".into()));
    let t = r["phase_times"].as_array().unwrap();
    assert!(t[0].as_f64() <= t[1].as_f64() && t[1].as_f64() <= t[2].as_f64());
}

#[test]
fn mintime_two_controls() {
    let dir = TempDir::new().unwrap();
    let out = run(&["mintime", "--L", "8"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&dir.path().join("outcome.json"));
    let t_f = r["minimal_time"]["t_f"].as_f64().unwrap();
    assert!((4.0..=6.5).contains(&t_f), "{t_f}");
    assert!(dir.path().join("cost_history.csv").exists());
}

#[test]
fn stationary_solutions() {
    let dir = TempDir::new().unwrap();
    let out = run(&["stationary", "--L", "12"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = json(&dir.path().join("stationary.json"));
    assert!(r["count"].as_u64().unwrap() >= 2);
    let out = run(&["stationary", "--L", "8"], &dir.path().join("short"));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&dir.path().join("short/stationary.json"))["count"], 1);
}

#[test]
fn binary_trajectory_matches_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[domain]\nlength = 5\nn_x = 20\n[simulate]\nt_final = 1\ndt = 0.01\nrecord_every = 10\ntol_final = 1.0\n[output]\nbinary = true\n");
    let out = run(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let bytes = fs::read(dir.path().join("trajectory.rdtj")).unwrap();
    let traj = rdcontrol::io::read_trajectory_binary(&bytes[..]).unwrap();
    assert_eq!(&bytes[..5], b"RDTJ1");
    assert_eq!(traj.n_x, 20);
    assert_eq!(traj.states.len(), 11);
    assert!((traj.length - 5.0).abs() < 1e-15 && (traj.dt - 0.1).abs() < 1e-12);
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let last: f64 = csv.lines().last().unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(last, *traj.states.last().unwrap().last().unwrap());
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[optimize]\nmax_iters = 40\n[output]\nbinary = true\n");
    for name in ["a", "b"] {
        let out = run(&["optimize", "--preset", "cas2", "--config", &cfg], &dir.path().join(name));
        assert_eq!(out.status.code(), Some(3));
        run(&["staircase", "--L", "5"], &dir.path().join(name).join("stair"));
    }
    let mut compared = 0;
    for sub in ["", "stair"] {
        for entry in fs::read_dir(dir.path().join("a").join(sub)).unwrap() {
            let entry = entry.unwrap();
            if entry.path().is_file() {
                let other = dir.path().join("b").join(sub).join(entry.file_name());
                assert_eq!(fs::read(entry.path()).unwrap(), fs::read(other).unwrap(), "{:?}", entry.file_name());
                compared += 1;
            }
        }
    }
    assert!(compared >= 10);
}
