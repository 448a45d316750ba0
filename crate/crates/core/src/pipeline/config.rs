use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distill::DistillConfig;
use crate::eval::{EvalProtocol, Method};
use crate::models::{Arch, GeneratorConfig, LearnerConfig};
use crate::synthesis::{FeatureConfig, GenerateConfig, PretrainConfig};
use crate::text::{TaskKind, TokenizerKind};

use super::PipelineError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    pub kind: TaskKind,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub max_len: usize,
    /// JSONL or TSV files replace the synthetic task when both are set.
    pub train_file: Option<PathBuf>,
    pub test_file: Option<PathBuf>,
    pub tokenizer: TokenizerKind,
    pub num_classes: Option<usize>,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            kind: TaskKind::Keyword,
            train_per_class: 1000,
            test_per_class: 500,
            max_len: 32,
            train_file: None,
            test_file: None,
            tokenizer: TokenizerKind::Char,
            num_classes: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dpc: usize,
    pub methods: Vec<Method>,
    pub sweep_dpcs: Vec<usize>,
    pub sweep_methods: Vec<Method>,
    /// Learner architecture for the cross-model evaluation.
    pub cross_arch: Arch,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dpc: 5,
            methods: Method::ALL.to_vec(),
            sweep_dpcs: vec![1, 5, 10, 20, 50, 100, 200],
            sweep_methods: vec![Method::Random, Method::Dilm],
            cross_arch: Arch::B,
        }
    }
}

/// Everything a run needs. Serialized verbatim into each run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub task: TaskConfig,
    pub generator: GeneratorConfig,
    pub pretrain: PretrainConfig,
    pub features: FeatureConfig,
    pub distill: DistillConfig,
    pub generate: GenerateConfig,
    pub eval: EvalProtocol,
    pub learner: LearnerConfig,
    pub experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 1,
            task: TaskConfig::default(),
            generator: GeneratorConfig::default(),
            pretrain: PretrainConfig::default(),
            features: FeatureConfig::default(),
            distill: DistillConfig::default(),
            generate: GenerateConfig::default(),
            eval: EvalProtocol::default(),
            learner: LearnerConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

impl RunConfig {
    /// Full-scale hyperparameters. Far too slow for a
    /// desktop; useful as a reference and a starting point.
    pub fn full() -> Self {
        Self::default()
    }

    /// Scaled-down counts and larger learning rates that finish the full
    /// keyword experiment in minutes on one CPU.
    pub fn desk() -> Self {
        let mut c = Self::default();
        c.task.max_len = 16;
        c.pretrain.steps = 1500;
        c.pretrain.lr = 1e-2;
        c.pretrain.batch = 32;
        c.distill.outer_loops = 30;
        c.distill.inner_loops = 10;
        c.distill.learner_steps = 5;
        c.distill.real_batch = 32;
        c.distill.syn_batch = 8;
        c.distill.pool_interval = 10;
        c.distill.learner_lr = 0.1;
        c.distill.generator_lr = 1e-3;
        c.distill.max_len = 16;
        c.generate.max_len = 16;
        c.eval.lr = 3e-2;
        c.experiment.sweep_dpcs = vec![1, 5, 10, 20, 50];
        c
    }

    /// Keeps the copies of shared settings consistent.
    pub fn normalized(mut self) -> Self {
        self.distill.learner = self.learner.clone();
        self.features.learner = self.learner.clone();
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        Ok(toml::from_str::<Self>(text)
            .map_err(|e| PipelineError::Config(e.to_string()))?
            .normalized())
    }

    /// First 12 hex digits of the SHA-256 of the serialized config.
    pub fn hash(&self) -> String {
        self.hash_with("")
    }

    /// Hash of the config followed by `extra` (e.g. input artifact paths).
    pub fn hash_with(&self, extra: &str) -> String {
        let mut h = Sha256::new();
        h.update(self.to_toml().as_bytes());
        if !extra.is_empty() {
            h.update(b"\n");
            h.update(extra.as_bytes());
        }
        h.finalize()
            .iter()
            .take(6)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Applies `key=value` with a dotted key path. The value is parsed as a
    /// TOML literal, falling back to a bare string.
    pub fn with_override(&self, assignment: &str) -> Result<Self, PipelineError> {
        let (key, raw) = assignment.split_once('=').ok_or_else(|| {
            PipelineError::Config(format!("override `{assignment}` is not key=value"))
        })?;
        let key = key.trim();
        let raw = raw.trim();
        let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut root = toml::Value::try_from(self).expect("config serializes");
        let mut node = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = node.as_table_mut().ok_or_else(|| {
                PipelineError::Config(format!("`{key}`: `{part}` is not a table"))
            })?;
            if i + 1 == parts.len() {
                table.insert(part.to_string(), value.clone());
                break;
            }
            node = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        let text = toml::to_string(&root).expect("table serializes");
        Self::from_toml(&text).map_err(|e| match e {
            PipelineError::Config(m) => PipelineError::Config(format!("`{assignment}`: {m}")),
            other => other,
        })
    }
}
