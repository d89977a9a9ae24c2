//! Command-line experiment runner for `polarlab-core`.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

use std::path::PathBuf;

use clap::{Args, Parser};

pub use config::ExperimentConfig;
pub use error::CliError;
pub use run::{run, Outcome, RunArgs, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "polarlab",
    version,
    about = "Gaussian random field polarity and collision experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Subcommand)]
pub enum Command {
    /// Draw one field sample on the grid.
    Sample(CommonArgs),
    /// Hitting probabilities of a target set.
    Hit(CommonArgs),
    /// Eigenvalue collision probabilities of a matrix ensemble.
    Collide(CommonArgs),
    /// Collision regime sweep over ε and grid refinements.
    Sweep(CommonArgs),
    /// Minkowski exponent fit of a target set.
    Minkowski(CommonArgs),
    /// Oscillation, modulus and good-cube covering diagnostics.
    Oscillate(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Experiment configuration (TOML).
    #[arg(short, long)]
    pub config: PathBuf,
    /// Override a configuration value, e.g. `--set lab.n=5000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory; overrides `output.dir` and $POLARLAB_OUT.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

impl Command {
    pub fn split(self) -> (Subcommand, RunArgs) {
        let (cmd, a) = match self {
            Command::Sample(a) => (Subcommand::Sample, a),
            Command::Hit(a) => (Subcommand::Hit, a),
            Command::Collide(a) => (Subcommand::Collide, a),
            Command::Sweep(a) => (Subcommand::Sweep, a),
            Command::Minkowski(a) => (Subcommand::Minkowski, a),
            Command::Oscillate(a) => (Subcommand::Oscillate, a),
        };
        let args = RunArgs {
            config: a.config,
            overrides: a.overrides,
            threads: a.threads,
            out: a.out,
        };
        (cmd, args)
    }
}
