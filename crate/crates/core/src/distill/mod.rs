//! Generator fine-tuning by gradient matching against a re-initialized
//! learner.

mod engine;
mod matching;
mod pool;
mod teacher;

pub use engine::{
    balanced_batch, run_distillation, CheckpointHook, DistillOutcome, LogRow, TrainingLog,
};
pub use matching::{
    closed_form_rewards, direct_backward, entropy, gm_loss, gm_loss_value,
    policy_gradient_backward, syn_weights, weighted_syn_loss, ClassBatch, ClassDiagnostics,
};
pub use pool::SynPool;
pub use teacher::{build_teacher_bank, TeacherBank};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, OptimizerKind};
use crate::coreset::CoresetError;
use crate::models::{LearnerConfig, ModelError};
use crate::text::TextError;

#[derive(Debug, Error)]
pub enum DistillError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Coreset(#[from] CoresetError),
    #[error("{side} gradient has zero norm")]
    ZeroGradient { side: &'static str },
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite matching loss or reward for class {class}")]
    NonFinite { class: usize },
    #[error("synthetic pool for class {class} has not been filled")]
    PoolEmpty { class: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("at outer {s}, inner {t}, class {class:?}: {source}")]
    At {
        s: usize,
        t: usize,
        class: Option<usize>,
        #[source]
        source: Box<DistillError>,
    },
    #[error("checkpoint hook failed: {0}")]
    Hook(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistillConfig {
    /// Outer loops; each re-initializes the learner.
    pub outer_loops: usize,
    /// Inner loops per outer loop; one generator step each.
    pub inner_loops: usize,
    /// Learner SGD steps on real data after each generator step.
    pub learner_steps: usize,
    /// Real samples per class in each matching step.
    pub real_batch: usize,
    /// Synthetic samples per class in each matching step.
    pub syn_batch: usize,
    /// Generator steps between pool refills.
    pub pool_interval: usize,
    /// Learner learning rate (eta).
    pub learner_lr: f64,
    /// Generator learning rate (alpha).
    pub generator_lr: f64,
    pub generator_optimizer: OptimizerKind,
    pub weight_decay: f64,
    pub clip_norm: Option<f64>,
    pub warmup_ratio: f64,
    pub teacher_sets: usize,
    pub top_p: f64,
    pub length_normalize: bool,
    /// Content-token cap for sampled pool entries.
    pub max_len: usize,
    /// Real batch size for the learner's inner updates (capped by dataset).
    pub learner_batch: usize,
    /// Use K-centers teacher sets for the real side; otherwise uniform draws.
    pub representative_teacher: bool,
    /// Cluster the pool and draw one sample per cluster; otherwise take
    /// consecutive chunks of the pool.
    pub diverse_minibatch: bool,
    /// Filled from the run-level `learner` section.
    #[serde(skip)]
    pub learner: LearnerConfig,
    /// Write a generator checkpoint every this many steps (0 = never).
    pub checkpoint_every: usize,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            outer_loops: 2000,
            inner_loops: 10,
            learner_steps: 20,
            real_batch: 200,
            syn_batch: 64,
            pool_interval: 200,
            learner_lr: 1e-2,
            generator_lr: 3e-7,
            generator_optimizer: OptimizerKind::adamw(),
            weight_decay: 0.01,
            clip_norm: Some(1.0),
            warmup_ratio: 0.05,
            teacher_sets: 10,
            top_p: 0.95,
            length_normalize: false,
            max_len: 32,
            learner_batch: 64,
            representative_teacher: true,
            diverse_minibatch: true,
            learner: LearnerConfig::default(),
            checkpoint_every: 0,
        }
    }
}

impl DistillConfig {
    pub fn total_steps(&self) -> usize {
        self.outer_loops * self.inner_loops
    }

    pub fn validate(&self) -> Result<(), DistillError> {
        let counts = [
            ("outer_loops", self.outer_loops),
            ("inner_loops", self.inner_loops),
            ("real_batch", self.real_batch),
            ("syn_batch", self.syn_batch),
            ("pool_interval", self.pool_interval),
            ("teacher_sets", self.teacher_sets),
            ("max_len", self.max_len),
            ("learner_batch", self.learner_batch),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(DistillError::Config(format!("{name} must be >= 1")));
            }
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(DistillError::Config(format!(
                "top_p {} not in (0, 1]",
                self.top_p
            )));
        }
        if !(self.generator_lr >= 0.0 && self.learner_lr >= 0.0) {
            return Err(DistillError::Config("learning rates must be >= 0".into()));
        }
        Ok(())
    }
}
