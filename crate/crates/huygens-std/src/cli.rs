//! Command-line parsing.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use huygens_core::dynamics::ModelKind;

use crate::commands::{self, Outcome};
use crate::config::{CommandKind, FileConfig, FlagValues, ParamOverrides, RunConfig};
use crate::error::CliResult;
use crate::figures::FigureId;

#[derive(Debug, Parser)]
#[command(name = "huygens", version, about = "Coupled pendulum clocks: simulate, predict and classify synchronization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a model and write the trajectory CSV plus a JSON sidecar.
    Simulate,
    /// First-order periodic solutions: closed forms next to the generic engine.
    Predict,
    /// Classify the synchronization regime of a trajectory CSV.
    Analyze {
        /// Trajectory CSV written by `simulate` or `reproduce`.
        input: PathBuf,
    },
    /// Evaluate predictions over a one-dimensional parameter grid.
    Sweep {
        /// Grid as axis:lo:hi:n with axis one of sigma, a, gamma, omega, mu, kappa.
        #[arg(long)]
        grid: Option<String>,
        /// Also simulate each point and classify the outcome.
        #[arg(long)]
        simulate: bool,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run one of the embedded figure experiments.
    Reproduce {
        #[arg(long)]
        figure: FigureId,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Model: full-nonlinear, dimensionless, linear, small-sigma, three-dof or two-mass.
    #[arg(long, global = true, value_parser = parse_model)]
    pub model: Option<ModelKind>,
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long = "theta1-0", global = true, allow_negative_numbers = true)]
    pub theta1_0: Option<f64>,
    #[arg(long = "theta2-0", global = true, allow_negative_numbers = true)]
    pub theta2_0: Option<f64>,
    /// End time in dimensionless units.
    #[arg(long = "t-end", global = true, allow_negative_numbers = true)]
    pub t_end: Option<f64>,
    /// Integrator tolerance.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    /// Output directory (default: $HUYGENS_OUT, then ./huygens-out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub a: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub omega: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub omega2: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    ModelKind::from_name(s).ok_or_else(|| {
        let names: Vec<&str> = ModelKind::ALL.iter().map(|m| m.name()).collect();
        format!("unknown model {s:?}; expected one of {}", names.join(", "))
    })
}

impl Cli {
    pub fn into_config(self) -> CliResult<(RunConfig, Option<PathBuf>)> {
        let c = self.common;
        let file = match &c.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let mut flags = FlagValues {
            model: c.model,
            overrides: ParamOverrides {
                mu: c.mu,
                a: c.a,
                sigma: c.sigma,
                omega: c.omega,
                gamma: c.gamma,
                kappa: c.kappa,
                beta: c.beta,
                omega2: c.omega2,
                epsilon: c.epsilon,
            },
            theta1_0: c.theta1_0,
            theta2_0: c.theta2_0,
            t_end: c.t_end,
            tol: c.tol,
            out: c.out,
            ..FlagValues::default()
        };
        let mut input = None;
        let kind = match self.command {
            Command::Simulate => CommandKind::Simulate,
            Command::Predict => CommandKind::Predict,
            Command::Analyze { input: path } => {
                input = Some(path);
                CommandKind::Analyze
            }
            Command::Sweep { grid, simulate, workers } => {
                flags.grid = grid;
                flags.simulate = simulate;
                flags.workers = workers;
                CommandKind::Sweep
            }
            Command::Reproduce { figure } => {
                flags.figure = Some(figure);
                CommandKind::Reproduce
            }
        };
        Ok((RunConfig::build(kind, file, flags)?, input))
    }
}

/// Parses `args`, runs the command and returns its outcome.
pub fn run<I, T>(args: I) -> Result<CliResult<Outcome>, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    Ok(cli.into_config().and_then(|(cfg, input)| commands::run(&cfg, input.as_deref())))
}
