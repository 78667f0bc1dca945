//! Command-line and config-file arguments. Every subcommand's flags are all
//! optional so a JSON config can supply them; flags given on the command line
//! win over the file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::UsageError;

#[derive(Debug, Parser)]
#[command(name = "uplift-rank", version, about = "Rank users by incremental value per unit of incremental cost")]
pub struct Cli {
    /// JSON object with settings for the subcommand (keys are flag names with
    /// underscores). A `config.resolved.json` from an earlier run also works.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic experiment with known effects.
    Gen(GenArgs),
    /// Build a dataset from a raw public file (census or covtype).
    Prep(PrepArgs),
    /// Fit one model on the train split of a dataset.
    Train(TrainArgs),
    /// Cost curve, AUCC and generalization scores of a saved model.
    Eval(EvalArgs),
    /// Explore/exploit campaign cycles on synthetic populations.
    Simulate(SimulateArgs),
    /// Fit several models and tabulate their AUCC.
    Compare(CompareArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Prep(_) => "prep",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Simulate(_) => "simulate",
            Command::Compare(_) => "compare",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct GenArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Outcome noise standard deviation.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Treatment assignment: `constant` or `logistic` (feature-dependent).
    #[arg(long)]
    pub assignment: Option<String>,
    /// Treatment probability under constant assignment.
    #[arg(long)]
    pub treat_prob: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct PrepArgs {
    /// `census` or `covtype`.
    #[arg(long)]
    pub recipe: Option<String>,
    /// Raw data file, optionally gzipped.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// JSON `{"features": [...]}` overriding the retained feature columns.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Hyperparameters shared by everything that fits models.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct FitArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed of the 60/20/20 train/validation/test split.
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Hidden layer widths, e.g. `16,8`. Empty means a single tanh unit.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub standardize: Option<bool>,
    /// `ratio`, `double-rectified` or `linear`.
    #[arg(long)]
    pub objective: Option<String>,
    /// Cost weight of the linear objective.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Propensity weighting of the ranking objectives: none, constant, logistic, linear.
    #[arg(long)]
    pub propensity: Option<String>,
    /// Fraction kept by the constrained model.
    #[arg(long)]
    pub percentage: Option<f64>,
    /// Cost budget of the constrained model; replaces `percentage`.
    #[arg(long)]
    pub budget: Option<f64>,
    /// `effectiveness` or `cost_ascending`.
    #[arg(long)]
    pub budget_order: Option<String>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub every: Option<usize>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    /// Ridge penalty of the R-learner fits.
    #[arg(long)]
    pub reg: Option<f64>,
    /// Propensity model of the R-learners: constant, logistic, linear.
    #[arg(long)]
    pub rl_propensity: Option<String>,
    /// Cost curve step in percent.
    #[arg(long)]
    pub grid_step: Option<u32>,
    /// `config.resolved.json` of a `gen` run (or a bare generator JSON); needed by the oracle.
    #[arg(long)]
    pub generator: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Dataset CSV in the native layout.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// drm, constrained, duality, rlearner, random or oracle.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// A `model.json` written by `train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// `test` (default), `val`, `train` or `all`.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub grid_step: Option<u32>,
    /// Propensity model for the generalization scores: constant, logistic, linear.
    #[arg(long)]
    pub propensity: Option<String>,
    /// Objective of the generalization scores.
    #[arg(long)]
    pub objective: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Cycle 0 explores only; later cycles add one exploit arm per model.
    #[arg(long)]
    pub cycles: Option<usize>,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub explore_fraction: Option<f64>,
    #[arg(long)]
    pub treat_prob_explore: Option<f64>,
    #[arg(long)]
    pub exploit_treat_prob: Option<f64>,
    /// Fraction of each arm's users targeted.
    #[arg(long)]
    pub exploit_percentage: Option<f64>,
    /// Cost budget per arm, in true incremental cost; replaces the percentage.
    #[arg(long)]
    pub exploit_budget: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub fit: FitArgs,
}

fn keys_of<T: Serialize>(v: &T) -> BTreeSet<String> {
    match serde_json::to_value(v) {
        Ok(Value::Object(m)) => m.keys().cloned().collect(),
        _ => BTreeSet::new(),
    }
}

fn read_config(path: &Path) -> anyhow::Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| UsageError(format!("config {} is not valid JSON: {e}", path.display())))?;
    let Value::Object(mut m) = v else {
        return Err(UsageError(format!("config {} must be a JSON object", path.display())).into());
    };
    // A resolved snapshot from an earlier run.
    if m.contains_key("command") {
        if let Some(Value::Object(args)) = m.remove("args") {
            return Ok(args);
        }
    }
    Ok(m)
}

/// Overlays the flags given on the command line onto the config file.
/// Unknown config keys are rejected.
pub fn resolve<T>(flags: T, config: Option<&Path>) -> anyhow::Result<T>
where
    T: Serialize + DeserializeOwned + Default,
{
    let Some(path) = config else { return Ok(flags) };
    let mut base = read_config(path)?;
    let known = keys_of(&T::default());
    let unknown: Vec<&String> = base.keys().filter(|k| !known.contains(*k)).collect();
    if !unknown.is_empty() {
        let known: Vec<&str> = known.iter().map(String::as_str).collect();
        return Err(UsageError(format!(
            "unknown config key(s) {unknown:?} in {}; expected some of {}",
            path.display(),
            known.join(", ")
        ))
        .into());
    }
    if let Value::Object(given) = serde_json::to_value(&flags)? {
        for (k, v) in given {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(base))
        .map_err(|e| UsageError(format!("config {}: {e}", path.display())).into())
}
