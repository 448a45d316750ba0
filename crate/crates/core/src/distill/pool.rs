use rand::Rng;

use crate::coreset::kmeans;
use crate::coreset::DEFAULT_MAX_ITERS;
use crate::models::{GeneratorModel, LearnerModel};
use crate::seeds::{derive_seed, rng_from};
use crate::text::Sample;

use super::DistillError;

#[derive(Clone, Debug, Default)]
struct ClassPool {
    samples: Vec<Sample>,
    log_probs: Vec<f64>,
    clusters: Vec<Vec<usize>>,
    cursor: usize,
}

/// Samples drawn from the generator in bulk, consumed `N` at a time until the
/// next refill.
#[derive(Clone, Debug)]
pub struct SynPool {
    classes: Vec<ClassPool>,
    refills: usize,
}

impl SynPool {
    pub fn new(num_classes: usize) -> Self {
        Self {
            classes: vec![ClassPool::default(); num_classes],
            refills: 0,
        }
    }

    pub fn refills(&self) -> usize {
        self.refills
    }

    pub fn len(&self, class: usize) -> usize {
        self.classes[class].samples.len()
    }

    pub fn is_empty(&self, class: usize) -> bool {
        self.classes[class].samples.is_empty()
    }

    pub fn samples(&self, class: usize) -> &[Sample] {
        &self.classes[class].samples
    }

    /// Log-probabilities under the generator at refill time.
    pub fn log_probs(&self, class: usize) -> &[f64] {
        &self.classes[class].log_probs
    }

    pub fn clusters(&self, class: usize) -> &[Vec<usize>] {
        &self.classes[class].clusters
    }

    /// Replace every class's contents with `n * interval` fresh samples. When
    /// `cluster` is set, pool features from `learner` are grouped into `n`
    /// k-means clusters.
    #[allow(clippy::too_many_arguments)]
    pub fn refill(
        &mut self,
        gen: &GeneratorModel,
        learner: &LearnerModel,
        n: usize,
        interval: usize,
        top_p: f64,
        max_len: usize,
        cluster: bool,
        seed: u64,
    ) -> Result<(), DistillError> {
        let size = n * interval;
        let refill_seed = derive_seed(seed, &format!("pool/{}", self.refills));
        for (c, pool) in self.classes.iter_mut().enumerate() {
            let mut rng = rng_from(derive_seed(refill_seed, &format!("class/{c}")));
            let mut samples = Vec::with_capacity(size);
            let mut log_probs = Vec::with_capacity(size);
            for _ in 0..size {
                let g = gen.sample(c, top_p, max_len, &mut rng)?;
                samples.push(g.sample);
                log_probs.push(g.log_prob);
            }
            let clusters = if cluster {
                let feats = learner.features_batch(&samples);
                let res = kmeans(&feats, n, DEFAULT_MAX_ITERS, rng.gen())?;
                (0..n).map(|k| res.members(k).collect()).collect()
            } else {
                Vec::new()
            };
            *pool = ClassPool {
                samples,
                log_probs,
                clusters,
                cursor: 0,
            };
        }
        self.refills += 1;
        Ok(())
    }

    /// One uniform draw from each cluster of `class`.
    pub fn diverse_minibatch(
        &self,
        class: usize,
        rng: &mut impl Rng,
    ) -> Result<Vec<Sample>, DistillError> {
        let pool = &self.classes[class];
        if pool.samples.is_empty() || pool.clusters.is_empty() {
            return Err(DistillError::PoolEmpty { class });
        }
        Ok(pool
            .clusters
            .iter()
            .map(|members| pool.samples[members[rng.gen_range(0..members.len())]].clone())
            .collect())
    }

    /// The next `n` pool entries in generation order, wrapping around.
    pub fn next_chunk(&mut self, class: usize, n: usize) -> Result<Vec<Sample>, DistillError> {
        let pool = &mut self.classes[class];
        if pool.samples.is_empty() {
            return Err(DistillError::PoolEmpty { class });
        }
        let len = pool.samples.len();
        let out = (0..n)
            .map(|i| pool.samples[(pool.cursor + i) % len].clone())
            .collect();
        pool.cursor = (pool.cursor + n) % len;
        Ok(out)
    }

    /// Install explicit contents for one class (used by tests and tools).
    pub fn set_class(&mut self, class: usize, samples: Vec<Sample>, clusters: Vec<Vec<usize>>) {
        let log_probs = vec![f64::NAN; samples.len()];
        self.classes[class] = ClassPool {
            samples,
            log_probs,
            clusters,
            cursor: 0,
        };
    }
}
