use std::io::Write;

use rand::seq::index;
use rand::Rng;
use serde::Serialize;

use crate::autodiff::{warmup_cosine, Optimizer};
use crate::models::{GeneratorModel, LearnerModel};
use crate::seeds::{derive_seed, rng_for, Rng as SeededRng};
use crate::text::{LabeledDataset, Sample};

use super::matching::{policy_gradient_backward, ClassBatch};
use super::pool::SynPool;
use super::teacher::{build_teacher_bank, TeacherBank};
use super::{DistillConfig, DistillError};

/// One row per (generator step, class).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogRow {
    pub step: usize,
    pub outer: usize,
    pub inner: usize,
    pub class: usize,
    pub gm_loss: f64,
    pub reward_mean: f64,
    pub reward_std: f64,
    pub weight_entropy: f64,
    pub generator_grad_norm: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, Default)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    pub fn steps(&self) -> usize {
        self.rows.last().map_or(0, |r| r.step + 1)
    }

    /// Class-averaged matching loss for each generator step.
    pub fn step_losses(&self) -> Vec<f64> {
        let mut out: Vec<(f64, usize)> = vec![(0.0, 0); self.steps()];
        for r in &self.rows {
            out[r.step].0 += r.gm_loss;
            out[r.step].1 += 1;
        }
        out.into_iter().map(|(s, n)| s / n.max(1) as f64).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub struct DistillOutcome {
    pub generator: GeneratorModel,
    pub log: TrainingLog,
}

/// Called after every `checkpoint_every` generator steps with the step count.
pub type CheckpointHook<'a> = &'a mut dyn FnMut(usize, &GeneratorModel) -> Result<(), String>;

/// `size` samples spread evenly over classes, each class drawn uniformly
/// without replacement (capped at the class size).
pub fn balanced_batch(dataset: &LabeledDataset, size: usize, rng: &mut impl Rng) -> Vec<Sample> {
    let c = dataset.num_classes();
    let mut out = Vec::with_capacity(size);
    for (k, bucket) in dataset.classes().iter().enumerate() {
        let share = size / c + usize::from(k < size % c);
        let take = share.min(bucket.len());
        for i in index::sample(rng, bucket.len(), take) {
            out.push(bucket[i].clone());
        }
    }
    out
}

fn at(s: usize, t: usize, class: Option<usize>) -> impl FnOnce(DistillError) -> DistillError {
    move |e| DistillError::At {
        s,
        t,
        class,
        source: Box::new(e),
    }
}

/// Fine-tunes `gen` so that its probability-weighted samples reproduce the
/// learner's real-data head gradients, re-initializing the learner every
/// outer loop. `feature_fn` embeds real samples for the teacher bank.
pub fn run_distillation(
    cfg: &DistillConfig,
    dataset: &LabeledDataset,
    mut gen: GeneratorModel,
    feature_fn: &dyn Fn(&Sample) -> Vec<f64>,
    seed: u64,
    mut hook: Option<CheckpointHook<'_>>,
) -> Result<DistillOutcome, DistillError> {
    cfg.validate()?;
    let classes = dataset.num_classes();
    if cfg.real_batch > dataset.min_class_size() {
        return Err(DistillError::Config(format!(
            "real_batch {} exceeds the smallest class ({})",
            cfg.real_batch,
            dataset.min_class_size()
        )));
    }
    let bank: Option<TeacherBank> = if cfg.representative_teacher {
        Some(build_teacher_bank(
            dataset,
            feature_fn,
            cfg.real_batch,
            cfg.teacher_sets,
            seed,
        )?)
    } else {
        None
    };
    let mut opt = Optimizer::new(
        cfg.generator_optimizer,
        cfg.generator_lr,
        cfg.weight_decay,
        cfg.clip_norm,
    );
    let total = cfg.total_steps();
    let mut pool = SynPool::new(classes);
    let mut draw_rng: SeededRng = rng_for(seed, "minibatch");
    let mut real_rng: SeededRng = rng_for(seed, "real");
    let mut log = TrainingLog::default();
    let mut step = 0;
    let vocab = gen.vocab().clone();

    for s in 0..cfg.outer_loops {
        let mut learner = LearnerModel::new(
            cfg.learner.clone(),
            vocab.clone(),
            derive_seed(seed, &format!("learner/{s}")),
        );
        let mut learner_opt = Optimizer::sgd(cfg.learner_lr);
        let mut learner_rng = rng_for(seed, &format!("learner-batches/{s}"));
        for t in 0..cfg.inner_loops {
            if step % cfg.pool_interval == 0 {
                pool.refill(
                    &gen,
                    &learner,
                    cfg.syn_batch,
                    cfg.pool_interval,
                    cfg.top_p,
                    cfg.max_len,
                    cfg.diverse_minibatch,
                    seed,
                )
                .map_err(at(s, t, None))?;
            }
            let mut real = Vec::with_capacity(classes);
            let mut syn = Vec::with_capacity(classes);
            for c in 0..classes {
                let r: Vec<Sample> = match &bank {
                    Some(b) => b
                        .batch(dataset, b.cursor(step), c)
                        .into_iter()
                        .cloned()
                        .collect(),
                    None => {
                        let bucket = dataset.class(c);
                        index::sample(&mut real_rng, bucket.len(), cfg.real_batch)
                            .into_iter()
                            .map(|i| bucket[i].clone())
                            .collect()
                    }
                };
                real.push(r);
                let x = if cfg.diverse_minibatch {
                    pool.diverse_minibatch(c, &mut draw_rng)
                } else {
                    pool.next_chunk(c, cfg.syn_batch)
                };
                syn.push(x.map_err(at(s, t, Some(c)))?);
            }
            let batches: Vec<ClassBatch<'_>> = real
                .iter()
                .zip(&syn)
                .map(|(r, x)| ClassBatch {
                    real: r,
                    synthetic: x,
                })
                .collect();
            gen.params.zero_grads();
            let diags =
                policy_gradient_backward(&mut gen, &learner, &batches, cfg.length_normalize)
                    .map_err(|e| {
                        let class = match &e {
                            DistillError::NonFinite { class } => Some(*class),
                            _ => None,
                        };
                        at(s, t, class)(e)
                    })?;
            opt.lr = cfg.generator_lr * warmup_cosine(step, total, cfg.warmup_ratio);
            let stats = opt
                .step(&mut gen.params)
                .map_err(|e| at(s, t, None)(e.into()))?;
            for d in diags {
                log.rows.push(LogRow {
                    step,
                    outer: s,
                    inner: t,
                    class: d.class,
                    gm_loss: d.gm_loss,
                    reward_mean: d.reward_mean,
                    reward_std: d.reward_std,
                    weight_entropy: d.weight_entropy,
                    generator_grad_norm: stats.grad_norm,
                    lr: opt.lr,
                });
            }
            let learner_batch = cfg.learner_batch.min(dataset.len());
            for _ in 0..cfg.learner_steps {
                let xb = balanced_batch(dataset, learner_batch, &mut learner_rng);
                learner
                    .fit_batch(&xb, &mut learner_opt)
                    .map_err(|e| at(s, t, None)(e.into()))?;
            }
            step += 1;
            if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 {
                if let Some(h) = hook.as_mut() {
                    h(step, &gen).map_err(|e| at(s, t, None)(DistillError::Hook(e)))?;
                }
            }
        }
    }
    Ok(DistillOutcome {
        generator: gen,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::rng_from;
    use crate::text::{make_synthetic_task, TaskKind};

    #[test]
    fn balanced_batch_splits_classes() {
        let d = make_synthetic_task(TaskKind::PairOrder3, 10, 0).unwrap();
        let mut rng = rng_from(1);
        let b = balanced_batch(&d, 8, &mut rng);
        let counts: Vec<usize> = (0..3)
            .map(|c| b.iter().filter(|s| s.label == c).count())
            .collect();
        assert_eq!(counts, vec![3, 3, 2]);
        assert_eq!(balanced_batch(&d, 100, &mut rng).len(), 30);
    }

    #[test]
    fn step_losses_average_classes() {
        let mut log = TrainingLog::default();
        for (step, class, l) in [(0, 0, 0.2), (0, 1, 0.4), (1, 0, 1.0), (1, 1, 0.0)] {
            log.rows.push(LogRow {
                step,
                outer: 0,
                inner: step,
                class,
                gm_loss: l,
                reward_mean: 0.0,
                reward_std: 0.0,
                weight_entropy: 0.0,
                generator_grad_norm: 0.0,
                lr: 0.0,
            });
        }
        let s = log.step_losses();
        assert!((s[0] - 0.3).abs() < 1e-15 && (s[1] - 0.5).abs() < 1e-15);
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,outer,inner,class,gm_loss,"));
        assert_eq!(text.lines().count(), 5);
    }
}
