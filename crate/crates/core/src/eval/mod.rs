//! Fixed-budget evaluation of candidate training sets, method comparison,
//! and report rendering.

mod report;
mod run;
mod stats;

pub use report::{markdown_table, sweep_svg, write_reports_csv, EvalReport, Method, RunScore};
pub use run::{evaluate_datasets, score_predictions, train_and_score, EvalJob};
pub use stats::{mean_std, welch_t_test};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::models::ModelError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("training diverged at step {0}")]
    Diverged(usize),
    #[error("empty training set")]
    EmptyTrain,
    #[error("empty test set")]
    EmptyTest,
    #[error("all {0} runs failed")]
    AllFailed(usize),
    #[error("missing artifact for method `{0}`")]
    MissingMethod(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Accuracy,
    /// Mean of accuracy and the F1 score of class 1.
    AccF1Mean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalProtocol {
    pub datasets_per_method: usize,
    pub runs_per_dataset: usize,
    /// Learner seeds for deterministic selections (herding).
    pub deterministic_runs: usize,
    pub train_steps: usize,
    pub lr: f64,
    pub batch: usize,
    pub warmup_ratio: f64,
    pub weight_decay: f64,
    pub clip_norm: Option<f64>,
    pub metric: Metric,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            datasets_per_method: 20,
            runs_per_dataset: 5,
            deterministic_runs: 100,
            train_steps: 200,
            lr: 1e-4,
            batch: 64,
            warmup_ratio: 0.5,
            weight_decay: 0.01,
            clip_norm: Some(1.0),
            metric: Metric::Accuracy,
        }
    }
}

impl EvalProtocol {
    pub fn total_runs(&self) -> usize {
        self.datasets_per_method * self.runs_per_dataset
    }
}
