//! `fleetrisk` command line.
//!
//! Exit status: 0 on success, 1 when the data or a model step fails, 2 for
//! usage problems (bad flags, missing files, `eval` before `train`).

mod commands;
mod config;
mod manifest;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// A problem with how the tool was invoked, tied to the offending flag.
#[derive(Debug)]
pub struct UsageError {
    pub flag: String,
    pub message: String,
}

impl UsageError {
    pub fn new(flag: &str, message: impl Into<String>) -> Self {
        Self {
            flag: flag.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.flag, self.message)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "fleetrisk", version, about = "Weekly vehicle breakdown-risk modelling")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON file of run settings; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    /// Generate a synthetic fleet export, utilization sidecar and ground truth.
    Synth,
    /// Parse the export and report rejected rows.
    Ingest,
    /// Build the weekly per-vehicle panel.
    Panel,
    /// Fit a model on the training split and save it.
    Train,
    /// Score the saved model on the test split.
    Eval,
    /// Refit over the standard feature subsets.
    Ablate,
    /// Roll out the proactive-repair policy and a random baseline.
    Simulate,
    /// Next-week risk of dropping below mission-essential levels.
    Mel,
    /// Run the whole pipeline and write every report artifact.
    Report,
    /// Grid-search hyperparameters by test-split separation ratio.
    Tune,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Ingest => "ingest",
            Command::Panel => "panel",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Ablate => "ablate",
            Command::Simulate => "simulate",
            Command::Mel => "mel",
            Command::Report => "report",
            Command::Tune => "tune",
        }
    }
}

/// Overrides for the config file. Only flags that were given are serialized.
#[derive(Args, Serialize, Default)]
struct Flags {
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "DIR")]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_name = "CSV")]
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<PathBuf>,
    #[arg(long, global = true, value_name = "CSV")]
    #[serde(skip_serializing_if = "Option::is_none")]
    utilization: Option<PathBuf>,
    #[arg(long, global = true, value_name = "FILE")]
    #[serde(skip_serializing_if = "Option::is_none")]
    aliases: Option<PathBuf>,
    #[arg(long, global = true, value_name = "CSV")]
    #[serde(skip_serializing_if = "Option::is_none")]
    panel: Option<PathBuf>,
    #[arg(long, global = true, value_name = "JSON")]
    #[serde(skip_serializing_if = "Option::is_none")]
    model_file: Option<PathBuf>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    delimiter: Option<String>,

    #[arg(long, global = true, value_name = "BOOL")]
    #[serde(skip_serializing_if = "Option::is_none")]
    include_scheduled: Option<bool>,
    #[arg(long, global = true, value_name = "YYYY-MM-DD")]
    #[serde(skip_serializing_if = "Option::is_none")]
    start_date: Option<String>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    end_week: Option<u32>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gap_cap: Option<u32>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    utilization_rate: Option<f64>,
    /// Per-type constant utilization rate, repeatable.
    #[arg(long = "type-rate", global = true, value_name = "TYPE=RATE")]
    #[serde(skip)]
    type_rate: Vec<String>,

    /// Comma-separated subset of id, type, unit, age, gap, util.
    #[arg(long, global = true, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    features: Option<Vec<String>>,
    /// logistic, forest or gbt.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<String>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    l2_lambda: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_iters: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_estimators: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_depth: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_features: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    min_leaf: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    learning_rate: Option<f64>,

    /// chronological or random.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<String>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    test_fraction: Option<f64>,
    /// highest_risk or random.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    policy: Option<String>,
    /// Mission-essential level, repeatable.
    #[arg(long, global = true, value_name = "TYPE:MEL[:ASSIGNED]")]
    #[serde(skip_serializing_if = "Option::is_none")]
    mel: Option<Vec<String>>,

    #[arg(long, global = true, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_max_depth: Option<Vec<usize>>,
    #[arg(long, global = true, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_n_estimators: Option<Vec<usize>>,
    #[arg(long, global = true, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_learning_rate: Option<Vec<f64>>,

    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_vehicles: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_weeks: Option<u32>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    beta0: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    beta_age: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    beta_gap: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    beta_util: Option<f64>,
}

impl Flags {
    fn to_overrides(&self) -> Result<serde_json::Value, UsageError> {
        let mut value = serde_json::to_value(self).expect("flags serialize");
        if !self.type_rate.is_empty() {
            let mut rates = BTreeMap::new();
            for entry in &self.type_rate {
                let (ty, rate) = entry
                    .rsplit_once('=')
                    .ok_or_else(|| UsageError::new("--type-rate", format!("expected TYPE=RATE, got `{entry}`")))?;
                let rate: f64 = rate
                    .parse()
                    .map_err(|_| UsageError::new("--type-rate", format!("`{rate}` is not a number")))?;
                rates.insert(ty.to_string(), rate);
            }
            value["type_rates"] = serde_json::to_value(rates).expect("rates serialize");
        }
        Ok(value)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = cli
        .flags
        .to_overrides()
        .and_then(|o| config::load(cli.config.as_deref(), o))
        .map_err(anyhow::Error::from)
        .and_then(|cfg| commands::run(cli.command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if let Some(usage) = err.downcast_ref::<UsageError>() {
                eprintln!("error: {usage}");
                ExitCode::from(2)
            } else {
                eprintln!("error: {err:#}");
                ExitCode::from(1)
            }
        }
    }
}
