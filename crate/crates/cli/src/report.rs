//! JSON documents written by the subcommands.

use std::path::{Path, PathBuf};

use crisp::{MetricsReport, TrainReport};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::Failure;

/// Sidecar holding the true class priors of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    /// Priors the generator was asked for, when the data is synthetic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_priors: Option<Vec<f64>>,
    /// Label frequencies actually present in the data.
    pub priors: Vec<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskSummary {
    pub input_rows: usize,
    pub kept: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriorDiagnostics {
    pub final_priors: Option<Vec<f64>>,
    pub true_priors: Option<Vec<f64>>,
    /// `|pi_hat_j - pi_j|` after the last epoch.
    pub final_abs_error: Option<Vec<f64>>,
    pub estimated: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timings {
    pub prior_seconds: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Inputs {
    pub train: PathBuf,
    pub val: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub n_train: usize,
    pub q: usize,
    pub c: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub config: RunConfig,
    pub inputs: Inputs,
    pub training: TrainReport,
    /// Metrics of the final model on the validation set.
    pub validation: Option<MetricsReport>,
    pub priors: PriorDiagnostics,
    pub timings: Timings,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize")
}
