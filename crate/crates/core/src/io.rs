//! File formats: trajectory CSV (`t,x,y`), the `RDTJ1` binary trajectory
//! format, schedule and cost-history CSV, and a serde helper for floats that
//! may be infinite.

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::pde::Trajectory;

pub const BINARY_MAGIC: &[u8; 5] = b"RDTJ1";

/// Serialize `f64` as a JSON number, or as the string `"inf"`/`"-inf"`/`"nan"`
/// when not finite.
pub mod json_f64 {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct F64Visitor;

    impl<'de> Visitor<'de> for F64Visitor {
        type Value = f64;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
        }
        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }
        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }
        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }
        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("unexpected float string {other:?}"))),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(F64Visitor)
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(x) => super::serialize(x, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            #[derive(Deserialize)]
            struct W(#[serde(with = "super")] f64);
            Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(std::fs::File::create(path)?))
}

/// Long-format CSV with header `t,x,y`, one row per snapshot and node.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut out = out;
    writeln!(out, "t,x,y")?;
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let n = state.len() - 1;
        for (j, y) in state.iter().enumerate() {
            let x = j as f64 * traj.length / n as f64;
            writeln!(out, "{t},{x},{y}")?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn save_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    write_trajectory_csv(traj, create(path)?)
}

/// `RDTJ1` layout: magic, `N_x` and `N_t` as little-endian `u64`, `L` and
/// `dt` as little-endian `f64`, then `N_t × (N_x + 1)` row-major `f64`.
/// `dt` is the spacing between stored snapshots.
pub fn write_trajectory_binary<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut out = out;
    let n_x = traj.states.first().map_or(0, |s| s.len().saturating_sub(1));
    let dt = if traj.times.len() > 1 {
        traj.times[1] - traj.times[0]
    } else {
        traj.schedule.dt
    };
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&(n_x as u64).to_le_bytes())?;
    out.write_all(&(traj.states.len() as u64).to_le_bytes())?;
    out.write_all(&traj.length.to_le_bytes())?;
    out.write_all(&dt.to_le_bytes())?;
    for state in &traj.states {
        for y in state {
            out.write_all(&y.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn save_trajectory_binary(traj: &Trajectory, path: &Path) -> Result<()> {
    write_trajectory_binary(traj, create(path)?)
}

/// Contents of an `RDTJ1` file.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryTrajectory {
    pub n_x: usize,
    pub length: f64,
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
}

pub fn read_trajectory_binary<R: Read>(input: R) -> Result<BinaryTrajectory> {
    let mut input = input;
    let mut magic = [0u8; 5];
    input.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Io("bad magic, not an RDTJ1 file".into()));
    }
    let mut b8 = [0u8; 8];
    let mut next = |input: &mut R| -> Result<[u8; 8]> {
        input.read_exact(&mut b8)?;
        Ok(b8)
    };
    let n_x = u64::from_le_bytes(next(&mut input)?) as usize;
    let n_t = u64::from_le_bytes(next(&mut input)?) as usize;
    let length = f64::from_le_bytes(next(&mut input)?);
    let dt = f64::from_le_bytes(next(&mut input)?);
    let mut states = Vec::with_capacity(n_t);
    for _ in 0..n_t {
        let mut row = Vec::with_capacity(n_x + 1);
        for _ in 0..=n_x {
            row.push(f64::from_le_bytes(next(&mut input)?));
        }
        states.push(row);
    }
    Ok(BinaryTrajectory {
        n_x,
        length,
        dt,
        states,
    })
}

/// CSV `t,u,v` with one row per control step (left end of the step).
pub fn save_schedule_csv(schedule: &crate::pde::ControlSchedule, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "t,u,v")?;
    for k in 0..schedule.n_steps() {
        writeln!(
            out,
            "{},{},{}",
            k as f64 * schedule.dt,
            schedule.u[k],
            schedule.v[k]
        )?;
    }
    out.flush()?;
    Ok(())
}

/// CSV `iteration,cost`.
pub fn save_cost_history_csv(history: &[f64], path: &Path) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "iteration,cost")?;
    for (i, c) in history.iter().enumerate() {
        writeln!(out, "{i},{c}")?;
    }
    out.flush()?;
    Ok(())
}

/// Pretty JSON, newline-terminated.
pub fn save_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
