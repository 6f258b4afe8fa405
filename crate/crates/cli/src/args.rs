use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Start-up control experiments for a gas-generator cycle engine model.
#[derive(Debug, Parser)]
#[command(name = "lre", version, about)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration (TOML). Flags override its values.
    #[arg(long, global = true, env = "LRE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Master seed for the GA and TD3.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory under which the run directory is created.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Cap on worker threads for sweeps and GA fitness evaluation.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ControllerKind {
    Ols,
    Pid,
    Rl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    #[value(name = "80")]
    Bar80,
    #[value(name = "100")]
    Bar100,
}

impl Target {
    pub fn bar(self) -> f64 {
        match self {
            Target::Bar80 => 80.0,
            Target::Bar100 => 100.0,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the plant coefficients to the 100 and 80 bar equilibria.
    Calibrate,
    /// Run the open-loop sequence on the nominal scenario.
    RunOls {
        #[arg(long, value_enum, default_value = "100")]
        target: Target,
    },
    /// Tune the PID family with the genetic algorithm.
    TunePid {
        #[arg(long)]
        population: Option<usize>,
        #[arg(long)]
        generations: Option<usize>,
    },
    /// Train the TD3 agent and write a checkpoint.
    Train {
        /// Total environment steps.
        #[arg(long)]
        steps: Option<usize>,
        /// Uniform-action warm-up steps before updates start.
        #[arg(long)]
        warmup: Option<usize>,
    },
    /// One nominal-efficiency episode of a controller.
    Evaluate {
        #[arg(long, value_enum)]
        controller: ControllerKind,
        #[arg(long, value_enum, default_value = "100")]
        target: Target,
        /// TD3 checkpoint directory (RL controller).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// The 16-scenario turbine-efficiency sweep for one controller and target.
    Sweep {
        #[arg(long, value_enum)]
        controller: ControllerKind,
        #[arg(long, value_enum)]
        target: Target,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Sweeps for several controllers and targets, plus tables and plots.
    Report {
        /// Controllers to include; defaults to ols and pid, plus rl when a checkpoint is known.
        #[arg(long, value_enum, value_delimiter = ',')]
        controller: Vec<ControllerKind>,
        /// Targets to include; defaults to the config's list.
        #[arg(long, value_enum, value_delimiter = ',')]
        target: Vec<Target>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Calibrate => "calibrate",
            Command::RunOls { .. } => "run-ols",
            Command::TunePid { .. } => "tune-pid",
            Command::Train { .. } => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Sweep { .. } => "sweep",
            Command::Report { .. } => "report",
        }
    }
}
