use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Clone, Parser)]
#[command(name = "coach-ope", version, about = "Off-policy evaluation and hidden-archetype simulation")]
pub struct Cli {
    /// TOML file with default settings; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Upper bound on worker threads.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Estimate target-policy values from a logged turn file.
    Evaluate(EvaluateArgs),
    /// Run hidden-archetype simulations and report aggregate metrics.
    Simulate(SimulateArgs),
    /// Generate a synthetic log with exact policy values.
    Synth(SynthArgs),
    /// Report log validation, propensity fit and overlap diagnostics.
    Diagnose(DiagnoseArgs),
}

/// Estimator knobs shared by `evaluate` and `diagnose`.
#[derive(Debug, Clone, Default, Args)]
pub struct EstimatorArgs {
    /// Importance-ratio clip.
    #[arg(long)]
    pub clip: Option<f64>,
    /// Bootstrap replicates.
    #[arg(long)]
    pub n_boot: Option<usize>,
    /// Confidence level of the bootstrap interval.
    #[arg(long)]
    pub level: Option<f64>,
    /// Cross-fitting folds (default: 5, or 3 under 10 sessions).
    #[arg(long)]
    pub folds: Option<usize>,
    /// Propensity floor.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Smoothing mixed into rule-based target policies.
    #[arg(long)]
    pub smoothing: Option<f64>,
    /// Reward the bootstrap interval covers: obj, user or total.
    #[arg(long)]
    pub reward: Option<String>,
    /// Satisfaction scale: zscore (per user) or raw (1-5).
    #[arg(long)]
    pub scale: Option<String>,
    /// Bins for calibration error.
    #[arg(long)]
    pub ece_bins: Option<usize>,
    /// Seed for fold assignment and bootstrap resampling.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Turn log (JSON lines).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Named target policy; repeatable. Default: all four named policies.
    #[arg(long = "policy", value_name = "NAME")]
    pub policies: Vec<String>,
    /// JSON file with one policy spec or an array of them; repeatable.
    #[arg(long = "policy-file", value_name = "FILE")]
    pub policy_files: Vec<PathBuf>,
    /// Policy every target is compared against in the archetype table.
    #[arg(long)]
    pub baseline: Option<String>,
    /// Ground-truth sidecar written by `synth`; adds estimate errors.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for CSV tables.
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    /// Turn log (JSON lines).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Named target policy whose ratios are summarized; repeatable.
    #[arg(long = "policy", value_name = "NAME")]
    pub policies: Vec<String>,
    /// JSON file with one policy spec or an array of them; repeatable.
    #[arg(long = "policy-file", value_name = "FILE")]
    pub policy_files: Vec<PathBuf>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for CSV tables.
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// heuristic, personalized or curiosity; repeatable. Default: all three.
    #[arg(long = "policy", value_name = "NAME")]
    pub policies: Vec<String>,
    /// Curiosity weight.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Last turn that earns the curiosity bonus.
    #[arg(long)]
    pub k: Option<u32>,
    /// Paired episodes per policy (default 200).
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Maximum turns per episode.
    #[arg(long)]
    pub horizon: Option<u32>,
    /// Independent rollouts per episode, for pass@k.
    #[arg(long)]
    pub rollouts: Option<usize>,
    /// Required, from here or the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Include rollout-0 traces of every episode.
    #[arg(long)]
    pub traces: bool,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV table of metrics per policy.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// JSON synthetic spec; fields left out take their defaults.
    #[arg(long, conflicts_with = "preset")]
    pub spec: Option<PathBuf>,
    /// Built-in spec: default or subgroup_harm.
    #[arg(long)]
    pub preset: Option<String>,
    /// Override the spec's session count.
    #[arg(long)]
    pub sessions: Option<usize>,
    /// Required, from here or the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Log path (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth sidecar path; default `<out stem>.truth.json`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}
