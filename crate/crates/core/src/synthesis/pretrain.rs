use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::autodiff::{warmup_cosine, Graph, Optimizer, OptimizerKind};
use crate::coreset::random_select;
use crate::distill::balanced_batch;
use crate::models::{GeneratorModel, LearnerConfig, LearnerModel};
use crate::seeds::{derive_seed, rng_for};
use crate::text::{encode_for_generator, LabeledDataset};

use super::SynthesisError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub batch: usize,
    pub warmup_ratio: f64,
    pub weight_decay: f64,
    pub clip_norm: Option<f64>,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            steps: 80_000,
            lr: 1e-5,
            batch: 64,
            warmup_ratio: 0.05,
            weight_decay: 0.01,
            clip_norm: Some(1.0),
        }
    }
}

pub struct PretrainOutcome {
    pub generator: GeneratorModel,
    /// Mean per-token loss of each step's batch.
    pub losses: Vec<f64>,
}

/// Language-model training on class-tagged encodings with AdamW and a
/// warm-up + cosine schedule. Aborts on a non-finite loss.
pub fn pretrain_generator(
    mut gen: GeneratorModel,
    dataset: &LabeledDataset,
    cfg: &PretrainConfig,
    seed: u64,
) -> Result<PretrainOutcome, SynthesisError> {
    if dataset.is_empty() {
        return Err(SynthesisError::EmptyDataset);
    }
    let encoded = dataset
        .iter()
        .map(|s| encode_for_generator(s, gen.vocab()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut opt = Optimizer::new(
        OptimizerKind::adamw(),
        cfg.lr,
        cfg.weight_decay,
        cfg.clip_norm,
    );
    let mut rng = rng_for(seed, "pretrain");
    let batch = cfg.batch.min(encoded.len()).max(1);
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let seqs: Vec<Vec<usize>> = index::sample(&mut rng, encoded.len(), batch)
            .into_iter()
            .map(|i| encoded[i].clone())
            .collect();
        let mut g = Graph::new();
        let p = gen.params.bind(&mut g);
        let loss = gen.lm_loss_batch(&mut g, &p, &seqs)?;
        let value = g.value(loss).item();
        if !value.is_finite() {
            return Err(SynthesisError::Diverged { step, loss: value });
        }
        g.backward(loss)?;
        gen.params.accumulate_grads(&g, &p);
        opt.lr = cfg.lr * warmup_cosine(step, cfg.steps, cfg.warmup_ratio);
        opt.step(&mut gen.params)?;
        losses.push(value);
    }
    Ok(PretrainOutcome {
        generator: gen,
        losses,
    })
}

/// Settings for the weak feature extractor used by K-centers, herding and
/// the teacher bank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub coreset_per_class: usize,
    pub steps: usize,
    pub lr: f64,
    pub batch: usize,
    /// Filled from the run-level `learner` section.
    #[serde(skip)]
    pub learner: LearnerConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            coreset_per_class: 50,
            steps: 200,
            lr: 3e-2,
            batch: 64,
            learner: LearnerConfig::default(),
        }
    }
}

/// A fresh learner trained on a random coreset; its encoder output is the
/// feature map.
pub fn train_feature_extractor(
    dataset: &LabeledDataset,
    cfg: &FeatureConfig,
    seed: u64,
) -> Result<LearnerModel, SynthesisError> {
    let k = cfg.coreset_per_class.min(dataset.min_class_size());
    let picks = random_select(dataset, k, derive_seed(seed, "features/coreset"))?;
    let coreset = dataset.subset(&picks.per_class)?;
    let mut learner = LearnerModel::new(
        cfg.learner.clone(),
        dataset.vocab().clone(),
        derive_seed(seed, "features/init"),
    );
    let mut opt = Optimizer::adamw(cfg.lr);
    let mut rng = rng_for(seed, "features/batches");
    for _ in 0..cfg.steps {
        let batch = balanced_batch(&coreset, cfg.batch.min(coreset.len()), &mut rng);
        learner.fit_batch(&batch, &mut opt)?;
    }
    Ok(learner)
}
