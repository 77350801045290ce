//! Experiment configuration: a TOML document, optionally layered over a
//! named preset. Unknown keys are rejected at every level.

use std::path::Path;

use rdcontrol::pde::{ramp, Field, Scheme};
use rdcontrol::strategies::StaircaseConfig;
use rdcontrol::{ModelSpec, ReactionModel};
use serde::Deserialize;

use crate::CliError;

pub const PRESETS: [(&str, &str); 5] = [
    ("cas1", include_str!("../presets/cas1.toml")),
    ("cas2", include_str!("../presets/cas2.toml")),
    ("cas3", include_str!("../presets/cas3.toml")),
    ("mintime2", include_str!("../presets/mintime2.toml")),
    ("mintime1", include_str!("../presets/mintime1.toml")),
];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_model")]
    pub model: ModelSpec,
    #[serde(default)]
    pub domain: DomainConfig,
    /// Seed for randomized probes.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub staircase: StaircaseConfig,
    #[serde(default)]
    pub uniform: UniformConfig,
    #[serde(default)]
    pub optimize: OptimizeConfig,
    #[serde(default)]
    pub mintime: MintimeConfig,
    #[serde(default)]
    pub stationary: StationaryConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_model() -> ModelSpec {
    ModelSpec::Cubic { theta: 1.0 / 3.0 }
}

/// A boundary or initial level: a number or one of the named equilibria.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Level {
    Value(f64),
    Named(Named),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Named {
    Theta,
    Zero,
    One,
}

impl Level {
    pub fn resolve(self, model: &ReactionModel) -> Result<f64, CliError> {
        let v = match self {
            Level::Value(v) => v,
            Level::Named(Named::Zero) => 0.0,
            Level::Named(Named::One) => 1.0,
            Level::Named(Named::Theta) => model
                .theta()
                .ok_or_else(|| CliError::Config("\"theta\" needs a bistable model".into()))?,
        };
        if !(0.0..=1.0).contains(&v) {
            return Err(CliError::Config(format!("level {v} outside [0,1]")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum InitialData {
    Ramp(RampTag),
    Level(Level),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampTag {
    /// `0.1 x/L + 0.8 (1 - x/L)`
    Ramp,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub length: f64,
    /// Grid intervals; each command has its own default.
    pub n_x: Option<usize>,
    pub y0: InitialData,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            length: 8.0,
            n_x: None,
            y0: InitialData::Ramp(RampTag::Ramp),
        }
    }
}

impl DomainConfig {
    pub fn initial_field(&self, model: &ReactionModel, n_x: usize) -> Result<Field, CliError> {
        Ok(match self.y0 {
            InitialData::Ramp(_) => ramp(self.length, n_x),
            InitialData::Level(l) => Field::constant(self.length, n_x, l.resolve(model)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    BackwardEuler,
    CrankNicolson,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::BackwardEuler => Scheme::backward_euler(),
            SchemeName::CrankNicolson => Scheme::crank_nicolson(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub t_final: f64,
    /// Defaults to the reference step `min(1e-3, 0.9/Lip f)`.
    pub dt: Option<f64>,
    pub u: Level,
    pub v: Level,
    pub scheme: SchemeName,
    pub record_every: usize,
    /// Times written to the plot-data file; default `0, T/4, T/2, 3T/4, T`.
    pub snapshots: Option<Vec<f64>>,
    /// Success threshold for the distance to `u` when `u = v`.
    pub tol_final: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            t_final: 20.0,
            dt: None,
            u: Level::Named(Named::Theta),
            v: Level::Named(Named::Theta),
            scheme: SchemeName::BackwardEuler,
            record_every: 100,
            snapshots: None,
            tol_final: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UniformConfig {
    /// Random initial data checked against the extremal capture time; 0
    /// skips the probe.
    pub n_probes: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    pub horizon: f64,
    pub n_t: usize,
    pub max_iters: usize,
    pub tol_grad: f64,
    /// Initial constant control; defaults to the target level.
    pub init_level: Option<f64>,
    pub tie_controls: bool,
    /// Keep `u = v = θ` and only evaluate.
    pub fixed_controls: bool,
    /// Stop early once `‖y(T) - θ‖∞` is below this.
    pub target_error: Option<f64>,
    /// The run counts as a success when `‖y(T) - θ‖∞` is below this.
    pub success_tol: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            horizon: 20.0,
            n_t: 400,
            max_iters: 2000,
            tol_grad: 1e-10,
            init_level: None,
            tie_controls: false,
            fixed_controls: false,
            target_error: None,
            success_tol: 2e-2,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MintimeConfig {
    pub n_t: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    /// Feasibility threshold on `‖y(T) - θ‖∞`.
    pub feas_tol: f64,
    pub max_bisect: usize,
    pub max_iters: usize,
    pub tol_grad: f64,
    pub init_level: Option<f64>,
    pub tie_controls: bool,
}

impl Default for MintimeConfig {
    fn default() -> Self {
        Self {
            n_t: 400,
            t_lo: 0.0,
            t_hi: 20.0,
            feas_tol: 2e-2,
            max_bisect: 40,
            max_iters: 3000,
            tol_grad: 1e-14,
            init_level: Some(0.0),
            tie_controls: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationaryConfig {
    pub a: Level,
    pub b: Level,
    /// Sample intervals of each solution.
    pub n: usize,
}

impl Default for StationaryConfig {
    fn default() -> Self {
        Self {
            a: Level::Value(0.0),
            b: Level::Value(0.0),
            n: 256,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Also write `trajectory.rdtj`.
    pub binary: bool,
    /// Write `trajectory.csv`; trajectories of long runs can be large.
    pub trajectory_csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            binary: false,
            trajectory_csv: true,
        }
    }
}

fn preset_table(name: &str) -> Result<toml::Table, CliError> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| CliError::Config(format!("unknown preset {name:?}")))?;
    text.parse::<toml::Table>()
        .map_err(|e| CliError::Config(format!("preset {name}: {e}")))
}

/// Values of `over` replace those of `base`; tables are merged key by key.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

pub fn load(preset: Option<&str>, path: Option<&Path>, length: Option<f64>) -> Result<ExperimentConfig, CliError> {
    let mut table = match preset {
        Some(p) => preset_table(p)?,
        None => toml::Table::new(),
    };
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // validated on its own first so diagnostics point into this file
        toml::from_str::<ExperimentConfig>(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let user = text
            .parse::<toml::Table>()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // a model is replaced as a whole: its keys depend on its kind
        if user.contains_key("model") {
            table.remove("model");
        }
        merge(&mut table, user);
    }
    let source = path
        .map(|p| p.display().to_string())
        .or_else(|| preset.map(|p| format!("preset {p}")))
        .unwrap_or_else(|| "defaults".into());
    let mut cfg: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("{source}: {e}")))?;
    if let Some(l) = length {
        cfg.domain.length = l;
    }
    if !(cfg.domain.length > 0.0) {
        return Err(CliError::Config(format!("length must be positive, got {}", cfg.domain.length)));
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        for (name, _) in PRESETS {
            let cfg = load(Some(name), None, None).unwrap();
            assert!(cfg.domain.length > 0.0, "{name}");
        }
        assert!(load(Some("cas9"), None, None).is_err());
    }

    #[test]
    fn levels_and_initial_data() {
        let cfg: ExperimentConfig = toml::from_str(
            "[domain]\nlength = 4\ny0 = \"theta\"\n[simulate]\nu = 0.25\nv = \"one\"\n",
        )
        .unwrap();
        let m = ReactionModel::from_spec(&cfg.model).unwrap();
        assert_eq!(cfg.simulate.u.resolve(&m).unwrap(), 0.25);
        assert_eq!(cfg.simulate.v.resolve(&m).unwrap(), 1.0);
        let y0 = cfg.domain.initial_field(&m, 10).unwrap();
        assert!(y0.values.iter().all(|&v| v == 1.0 / 3.0));
        assert!(Level::Value(1.5).resolve(&m).is_err());
        assert!(toml::from_str::<ExperimentConfig>("[domain]\ny0 = \"wave\"\n").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in [
            "lenght = 3\n",
            "[simulate]\ntfinal = 3\n",
            "[staircase]\nepsilon = 0.01\nbeta = 2\n",
            "[model]\nkind = \"logistic\"\ntheta = 0.3\n",
            "[model]\nkind = \"quartic\"\n",
        ] {
            assert!(toml::from_str::<ExperimentConfig>(text).is_err(), "{text}");
        }
    }
}
