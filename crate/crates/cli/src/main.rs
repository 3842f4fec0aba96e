mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Kinodynamic motion planning over motion primitives.
#[derive(Parser, Debug)]
#[command(name = "idbastar", version)]
pub struct Cli {
    /// YAML settings file; flags given on the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a motion primitive library for one model.
    GenPrimitives(GenArgs),
    /// Run a single discontinuity-bounded search.
    Dbastar(SearchArgs),
    /// Repair an initial guess with the trajectory optimizer.
    Optimize(OptimizeArgs),
    /// Run the anytime planner.
    Plan(PlanArgs),
    /// Run repeated planning trials and write reports.
    Bench(BenchArgs),
    /// Check a trajectory against a problem.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seconds.
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a readable YAML copy.
    #[arg(long)]
    pub yaml: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum HeuristicKind {
    Euclidean,
    Roadmap,
    Blind,
}

#[derive(Args, Debug)]
pub struct HeuristicArgs {
    #[arg(long, value_enum)]
    pub heuristic: Option<HeuristicKind>,
    #[arg(long, default_value_t = 1000)]
    pub roadmap_vertices: usize,
    #[arg(long, default_value_t = 1.0)]
    pub roadmap_radius: f64,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long)]
    pub primitives: PathBuf,
    /// Use only the first N primitives.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[command(flatten)]
    pub heuristic: HeuristicArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyKind {
    FreeDt,
    SearchT,
    Mpc,
    Mpcc,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub problem: PathBuf,
    /// YAML with `states` and `actions`.
    #[arg(long)]
    pub guess: PathBuf,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyKind>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long)]
    pub primitives: PathBuf,
    /// Seconds.
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n0: Option<usize>,
    #[arg(long)]
    pub delta0: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyKind>,
    #[command(flatten)]
    pub heuristic: HeuristicArgs,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub problem: Vec<PathBuf>,
    /// Directory holding one `<model>.bin` library per model.
    #[arg(long)]
    pub primitives_dir: PathBuf,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Seconds per trial.
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "bench_out")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Check the stitched-solution conditions at this bound instead of full
    /// feasibility.
    #[arg(long)]
    pub delta: Option<f64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::EXIT_INVALID)
        }
    }
}
