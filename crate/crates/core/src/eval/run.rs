use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::index;

use crate::autodiff::{warmup_cosine, Optimizer};
use crate::models::{LearnerConfig, LearnerModel};
use crate::seeds::{derive_seed, rng_for};
use crate::text::{LabeledDataset, Sample};

use super::report::{EvalReport, RunScore};
use super::{EvalError, EvalProtocol, Metric};

/// Accuracy, or the mean of accuracy and class-1 F1.
pub fn score_predictions(pred: &[usize], gold: &[usize], metric: Metric) -> f64 {
    let n = gold.len() as f64;
    let correct = pred.iter().zip(gold).filter(|(p, g)| p == g).count() as f64;
    let acc = correct / n;
    match metric {
        Metric::Accuracy => acc,
        Metric::AccF1Mean => {
            let tp = pred
                .iter()
                .zip(gold)
                .filter(|&(&p, &g)| p == 1 && g == 1)
                .count() as f64;
            let fp = pred
                .iter()
                .zip(gold)
                .filter(|&(&p, &g)| p == 1 && g != 1)
                .count() as f64;
            let fn_ = pred
                .iter()
                .zip(gold)
                .filter(|&(&p, &g)| p != 1 && g == 1)
                .count() as f64;
            let f1 = if tp == 0.0 {
                0.0
            } else {
                2.0 * tp / (2.0 * tp + fp + fn_)
            };
            (acc + f1) / 2.0
        }
    }
}

/// Trains a fresh learner for `protocol.train_steps` AdamW steps on `train`
/// and scores it on `test`.
pub fn train_and_score(
    train: &LabeledDataset,
    test: &LabeledDataset,
    learner: &LearnerConfig,
    protocol: &EvalProtocol,
    seed: u64,
) -> Result<f64, EvalError> {
    if train.is_empty() {
        return Err(EvalError::EmptyTrain);
    }
    if test.is_empty() {
        return Err(EvalError::EmptyTest);
    }
    let samples: Vec<&Sample> = train.iter().collect();
    let mut model = LearnerModel::new(
        learner.clone(),
        train.vocab().clone(),
        derive_seed(seed, "init"),
    );
    let mut opt = Optimizer::new(
        crate::autodiff::OptimizerKind::adamw(),
        protocol.lr,
        protocol.weight_decay,
        protocol.clip_norm,
    );
    let mut rng = rng_for(seed, "order");
    let batch = protocol.batch.min(samples.len());
    for step in 0..protocol.train_steps {
        let xb: Vec<Sample> = index::sample(&mut rng, samples.len(), batch)
            .into_iter()
            .map(|i| samples[i].clone())
            .collect();
        opt.lr = protocol.lr * warmup_cosine(step, protocol.train_steps, protocol.warmup_ratio);
        match model.fit_batch(&xb, &mut opt) {
            Ok((loss, _)) if loss.is_finite() => {}
            Ok(_) => return Err(EvalError::Diverged(step)),
            Err(crate::models::ModelError::Autodiff(
                crate::autodiff::AutodiffError::NonFiniteGradient { .. },
            )) => return Err(EvalError::Diverged(step)),
            Err(e) => return Err(e.into()),
        }
    }
    let pred: Vec<usize> = test.iter().map(|s| model.predict(s)).collect();
    let gold: Vec<usize> = test.iter().map(|s| s.label).collect();
    Ok(score_predictions(&pred, &gold, protocol.metric))
}

/// One (dataset, learner seed) evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalJob {
    pub dataset: usize,
    pub run: usize,
    pub seed: u64,
}

/// Evaluates every dataset `runs` times in parallel over `workers` threads.
/// Learner seeds depend only on `(seed, dataset index, run)`, so methods
/// evaluated under the same seed share learner initializations. Diverged
/// runs are recorded as failures; other errors abort.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_datasets(
    method: &str,
    dpc: usize,
    datasets: &[LabeledDataset],
    runs: usize,
    test: &LabeledDataset,
    learner: &LearnerConfig,
    protocol: &EvalProtocol,
    seed: u64,
    workers: usize,
) -> Result<EvalReport, EvalError> {
    let jobs: Vec<EvalJob> = (0..datasets.len())
        .flat_map(|d| {
            (0..runs).map(move |r| EvalJob {
                dataset: d,
                run: r,
                seed: derive_seed(seed, &format!("eval/{d}/{r}")),
            })
        })
        .collect();
    let results: Vec<Mutex<Option<Result<f64, EvalError>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(job) = jobs.get(i) else { break };
        let r = train_and_score(&datasets[job.dataset], test, learner, protocol, job.seed);
        *results[i].lock().unwrap() = Some(r);
    };
    let workers = workers.max(1).min(jobs.len().max(1));
    if workers == 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(worker);
            }
        });
    }
    let mut scored = Vec::with_capacity(jobs.len());
    for (job, slot) in jobs.iter().zip(results) {
        let score = match slot.into_inner().unwrap().expect("every job ran") {
            Ok(v) => Some(v),
            Err(EvalError::Diverged(_)) => None,
            Err(e) => return Err(e),
        };
        scored.push(RunScore {
            dataset: job.dataset,
            run: job.run,
            seed: job.seed,
            score,
        });
    }
    let report = EvalReport::new(method, learner.arch, dpc, scored);
    if report.scores().is_empty() {
        return Err(EvalError::AllFailed(report.runs.len()));
    }
    Ok(report)
}
