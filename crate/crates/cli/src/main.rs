// NaN must fail the positivity checks, hence the negated comparisons
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod config;
mod run;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] rdcontrol::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use rdcontrol::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                E::Domain(_) | E::InvalidModel(_) | E::NotBistable | E::DimensionMismatch(_) | E::Io(_) => 2,
                E::Infeasible { .. }
                | E::PathInfeasible { .. }
                | E::Timeout(_)
                | E::CaptureRadius { .. }
                | E::InfeasibleUpperBound(_) => 3,
                E::StepFailure(_) | E::Numerical(_) => 4,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Cas1,
    Cas2,
    Cas3,
    Mintime2,
    Mintime1,
}

impl Preset {
    fn name(self) -> &'static str {
        match self {
            Preset::Cas1 => "cas1",
            Preset::Cas2 => "cas2",
            Preset::Cas3 => "cas3",
            Preset::Mintime2 => "mintime2",
            Preset::Mintime1 => "mintime1",
        }
    }
}

/// Boundary control of y_t - y_xx = f(y) on (0, L).
#[derive(Parser, Debug)]
#[command(name = "rdcontrol", version)]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment config; layered over the preset when both are given
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Named experiment
    #[arg(short, long, global = true, value_enum)]
    preset: Option<Preset>,

    /// Output directory
    #[arg(short, long, global = true, default_value = "out")]
    out: PathBuf,

    /// Domain length, overriding the config
    #[arg(long = "L", global = true)]
    length: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Threshold lengths L*, L_θ and their lower bounds
    Thresholds,
    /// Constant-control simulation
    Simulate,
    /// Staircase strategy to θ
    Staircase,
    /// Terminal-cost optimal control
    Optimize,
    /// Minimal control time by bisection on the horizon
    Mintime,
    /// Stationary solutions with given boundary values
    Stationary,
}

fn execute(args: &Args) -> Result<run::Report, CliError> {
    let cfg = config::load(args.preset.map(Preset::name), args.config.as_deref(), args.length)?;
    let ctx = run::Context::new(cfg, args.out.clone())?;
    match args.command {
        Command::Thresholds => run::thresholds(&ctx),
        Command::Simulate => run::simulate(&ctx),
        Command::Staircase => run::staircase(&ctx),
        Command::Optimize => run::optimize(&ctx),
        Command::Mintime => run::mintime(&ctx),
        Command::Stationary => run::stationary(&ctx),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(report) => {
            println!("{}", report.summary);
            if report.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
