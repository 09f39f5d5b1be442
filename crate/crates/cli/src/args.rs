use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Catheter navigation simulator and demonstration-guided path planner.
#[derive(Debug, Parser)]
#[command(name = "cathnav", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy from demonstrations and write a checkpoint and CSV log.
    Train(TrainArgs),
    /// Evaluate a checkpoint over seeded episodes and write a metrics report.
    Evaluate(EvaluateArgs),
    /// Export the greedy rollout of a checkpoint as a guidance path.
    Plan(PlanArgs),
    /// Record scripted-expert demonstrations.
    Demos(DemosArgs),
    /// Re-execute a recorded demonstration.
    Replay(ReplayArgs),
    /// Kruskal-Wallis comparison of two evaluation reports.
    Compare(CompareArgs),
    /// Render SVG plots of logs, reports and paths.
    Plot(PlotArgs),
    /// Write a built-in vessel mesh and its scenario file.
    GenMesh(GenMeshArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Scenario TOML file or built-in name (toy-curved, toy-straight).
    #[arg(long)]
    pub scenario: String,
    /// Training configuration (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory of *.jsonl demonstrations.
    #[arg(long)]
    pub demos: PathBuf,
    /// Output directory for checkpoint.json, train_log.csv and config.toml.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the configuration
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the environment step budget in the configuration
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Start from the network weights of an earlier checkpoint.
    #[arg(long, conflicts_with = "resume")]
    pub init_from: Option<PathBuf>,
    /// Continue an interrupted run from its checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Enable contact deformation and heartbeat motion.
    #[arg(long)]
    pub dynamic: bool,
    /// Iterations between checkpoint writes.
    #[arg(long, default_value_t = 10)]
    pub checkpoint_every: usize,
    /// Suppress per-iteration progress lines
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Evaluate with contact deformation and heartbeat motion.
    #[arg(long)]
    pub dynamic: bool,
    /// Sample actions instead of taking the policy mean.
    #[arg(long)]
    pub stochastic: bool,
    /// Report path (JSON); printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub scenario: String,
    /// Seed for the start pose and target draw.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub dynamic: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DemosArgs {
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 30)]
    pub count: usize,
    /// Gaussian action noise relative to the per-step bend bound.
    #[arg(long, default_value_t = 0.3)]
    pub noise: f64,
    /// Demonstration `i` is recorded with seed `seed + i`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "scripted")]
    pub recorder: String,
    #[arg(long)]
    pub date: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub demo: PathBuf,
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    /// Also write the comparison as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    #[command(subcommand)]
    pub target: PlotTarget,
}

#[derive(Debug, Clone, Subcommand)]
pub enum PlotTarget {
    /// Success rate, losses and bend limit over a training log.
    Log {
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tracking error over time from an evaluation report.
    Report {
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Planned path over the scenario centerline.
    Path {
        path: PathBuf,
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ToyKind {
    Curved,
    Straight,
}

#[derive(Debug, Clone, Args)]
pub struct GenMeshArgs {
    #[arg(long, value_enum)]
    pub kind: ToyKind,
    /// Directory receiving `<name>.obj` and `<name>.toml`.
    #[arg(long)]
    pub out: PathBuf,
}
