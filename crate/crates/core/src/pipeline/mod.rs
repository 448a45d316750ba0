//! End-to-end orchestration shared by the command-line tool and the
//! acceptance experiments.

mod config;
mod steps;

pub use config::{ExperimentConfig, RunConfig, TaskConfig};
pub use steps::{
    ablation, compare_methods, cross_model, distill_generator, dpc_sweep, feature_extractor,
    load_task, method_datasets, pretrain, Generators, Task, ABLATION_ROWS,
};

use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::coreset::CoresetError;
use crate::distill::DistillError;
use crate::eval::EvalError;
use crate::models::ModelError;
use crate::synthesis::SynthesisError;
use crate::text::TextError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Coreset(#[from] CoresetError),
    #[error(transparent)]
    Distill(#[from] DistillError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
