use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use trajeval_core::Source;

#[derive(Debug, Parser)]
#[command(name = "trajeval", version, about = "Kinematics, calibration, aggregation, scoring and GRPO simulation for manipulation trajectories")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Every subcommand. The serialized form is the `config.json` echoed into
/// each run directory and accepted by `replay`.
#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Generate the synthetic fixture dataset
    Fixture(FixtureArgs),
    /// Per-episode kinematic statistics and physics prompts
    Kinematics(KinematicsArgs),
    /// Fit the composite score to expert rankings with the GA
    Calibrate(CalibrateArgs),
    /// Score every episode with an evaluator and report metrics
    Score(ScoreArgs),
    /// Build composite keyframe images from a frame directory
    Aggregate(AggregateArgs),
    /// Run GRPO on the toy policy and emit the reward trace
    GrpoSim(GrpoSimArgs),
    /// Compare a predictions file against manifest labels
    Metrics(MetricsArgs),
    /// Re-run a command from an echoed config.json
    #[serde(skip)]
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fixture(_) => "fixture",
            Command::Kinematics(_) => "kinematics",
            Command::Calibrate(_) => "calibrate",
            Command::Score(_) => "score",
            Command::Aggregate(_) => "aggregate",
            Command::GrpoSim(_) => "grpo-sim",
            Command::Metrics(_) => "metrics",
            Command::Replay(_) => "replay",
        }
    }

    pub fn out_dir(&self) -> Option<&PathBuf> {
        match self {
            Command::Fixture(a) => Some(&a.out),
            Command::Kinematics(a) => Some(&a.out),
            Command::Calibrate(a) => Some(&a.out),
            Command::Score(a) => Some(&a.out),
            Command::Aggregate(a) => Some(&a.out),
            Command::GrpoSim(a) => Some(&a.out),
            Command::Metrics(a) => Some(&a.out),
            Command::Replay(_) => None,
        }
    }

    pub fn set_out_dir(&mut self, dir: PathBuf) {
        match self {
            Command::Fixture(a) => a.out = dir,
            Command::Kinematics(a) => a.out = dir,
            Command::Calibrate(a) => a.out = dir,
            Command::Score(a) => a.out = dir,
            Command::Aggregate(a) => a.out = dir,
            Command::GrpoSim(a) => a.out = dir,
            Command::Metrics(a) => a.out = dir,
            Command::Replay(_) => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FixtureArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of episodes
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    /// Joints per episode (7 or 14)
    #[arg(long, default_value_t = 7)]
    pub dof: u32,
    /// Run directory; the dataset is written inside it
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct KinematicsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Unused; this command draws no random numbers
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub population: usize,
    #[arg(long, default_value_t = 200)]
    pub generations: usize,
    #[arg(long, default_value_t = 3)]
    pub tournament_k: usize,
    #[arg(long, default_value_t = 0.9)]
    pub crossover_rate: f64,
    /// BLX-alpha crossover spread
    #[arg(long, default_value_t = 0.5)]
    pub blend_alpha: f64,
    /// Per-gene mutation probability
    #[arg(long, default_value_t = 0.2)]
    pub mutation_rate: f64,
    /// Mutation standard deviation as a fraction of each parameter's range
    #[arg(long, default_value_t = 0.05)]
    pub mutation_sigma: f64,
    #[arg(long, default_value_t = 1)]
    pub elitism: usize,
    /// Human score mean; taken from the eg_score labels when omitted
    #[arg(long, requires = "human_std")]
    pub human_mean: Option<f64>,
    /// Human score standard deviation
    #[arg(long, requires = "human_mean")]
    pub human_std: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolArg {
    /// Expert grade labels
    Eg,
    /// Rank-guided calibrated labels
    Rg,
}

pub fn parse_grid(s: &str) -> Result<(u32, u32), String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("grid must look like 2x2, got {s:?}"))?;
    let r: u32 = r.trim().parse().map_err(|_| format!("bad grid rows in {s:?}"))?;
    let c: u32 = c.trim().parse().map_err(|_| format!("bad grid columns in {s:?}"))?;
    if r == 0 || c == 0 {
        return Err("grid dimensions must be positive".into());
    }
    Ok((r, c))
}

pub fn parse_size(s: &str) -> Result<(u32, u32), String> {
    if let Ok(n) = s.parse::<u32>() {
        return if n > 0 { Ok((n, n)) } else { Err("size must be positive".into()) };
    }
    let (w, h) = parse_grid(s).map_err(|_| format!("size must look like 448 or 448x448, got {s:?}"))?;
    Ok((w, h))
}

fn parse_source(s: &str) -> Result<Source, String> {
    s.parse::<Source>().map_err(|e| e.to_string())
}

fn parse_outcome(s: &str) -> Result<bool, String> {
    match s {
        "success" => Ok(true),
        "failure" => Ok(false),
        _ => Err(format!("expected success or failure, got {s:?}")),
    }
}

pub fn parse_ratio(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad ratio component {p:?}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(format!("ratio must have three parts like 4:3:3, got {s:?}")),
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Calibration file written by `calibrate`
    #[arg(long)]
    pub theta: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Rg)]
    pub protocol: ProtocolArg,
    /// Require a think block before the answer
    #[arg(long)]
    pub require_cot: bool,
    /// Grid layout of each composite
    #[arg(long, value_parser = parse_grid, default_value = "2x2")]
    pub grid: (u32, u32),
    /// Keyframes per episode
    #[arg(long, default_value_t = 8)]
    pub keyframes: usize,
    /// Composite size in pixels, `N` or `WxH`
    #[arg(long, value_parser = parse_size, default_value = "448")]
    pub out_size: (u32, u32),
    /// Frame view; defaults to each episode's first view
    #[arg(long)]
    pub view: Option<String>,
    /// External evaluator program (request JSON on stdin, answer on stdout)
    #[arg(long)]
    pub evaluator_cmd: Option<PathBuf>,
    /// Argument passed to the external evaluator; repeatable
    #[arg(long = "evaluator-arg", allow_hyphen_values = true)]
    pub evaluator_args: Vec<String>,
    /// Also write labeled_manifest.json with predicted scores as labels
    #[arg(long)]
    pub write_labels: bool,
    /// Unused; scoring draws no random numbers
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct AggregateArgs {
    /// Directory of frame_NNNNN.png files
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Grid layout; repeat for several, each written to its own subdirectory
    #[arg(long, value_parser = parse_grid, default_value = "2x2")]
    pub grid: Vec<(u32, u32)>,
    /// Run the 2x2, 3x3 and 4x4 ablation grids
    #[arg(long, conflicts_with = "grid")]
    pub ablation: bool,
    #[arg(long, default_value_t = 8)]
    pub keyframes: usize,
    #[arg(long, value_parser = parse_size, default_value = "448")]
    pub out_size: (u32, u32),
    /// Unused; aggregation draws no random numbers
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GrpoSimArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 17)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    /// Rollouts per group
    #[arg(long, default_value_t = 8)]
    pub group_size: usize,
    /// Width of the Gaussian score reward
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Format reward share
    #[arg(long, default_value_t = 0.2)]
    pub gamma: f64,
    /// Score:success:source reward ratio
    #[arg(long, value_parser = parse_ratio, default_value = "4:3:3")]
    pub weights: (f64, f64, f64),
    /// KL penalty coefficient
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    /// Answer without a think block
    #[arg(long)]
    pub no_cot: bool,
    #[arg(long, default_value_t = 8.0)]
    pub gt_score: f64,
    #[arg(long, value_parser = parse_outcome, default_value = "success")]
    pub gt_success: bool,
    #[arg(long, value_parser = parse_source, default_value = "policy")]
    pub gt_source: Source,
    /// Replace the reward with this constant (flat-reward control run)
    #[arg(long)]
    pub constant_reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct MetricsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// predictions.csv written by `score`
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Rg)]
    pub protocol: ProtocolArg,
    /// Unused; metrics draw no random numbers
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ReplayArgs {
    /// config.json from an earlier run
    #[arg(long)]
    pub config: PathBuf,
    /// Write into this directory instead of the recorded one
    #[arg(long)]
    pub out: Option<PathBuf>,
}
