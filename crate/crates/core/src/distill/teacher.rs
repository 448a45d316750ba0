use crate::coreset::kcenters_indices;
use crate::seeds::derive_seed;
use crate::text::{LabeledDataset, Sample};

use super::DistillError;

/// Fixed K-centers mini-batches of real data, one set per seed, each with
/// one batch per class. Training cycles through the sets.
#[derive(Clone, Debug)]
pub struct TeacherBank {
    /// `sets[s][c]` = indices into class `c`.
    sets: Vec<Vec<Vec<usize>>>,
    batch: usize,
}

impl TeacherBank {
    pub fn count(&self) -> usize {
        self.sets.len()
    }

    pub fn batch_size(&self) -> usize {
        self.batch
    }

    /// Set used at training step `step`.
    pub fn cursor(&self, step: usize) -> usize {
        step % self.sets.len()
    }

    pub fn indices(&self, set: usize, class: usize) -> &[usize] {
        &self.sets[set][class]
    }

    /// Samples of set `set` for `class`.
    pub fn batch<'a>(
        &self,
        dataset: &'a LabeledDataset,
        set: usize,
        class: usize,
    ) -> Vec<&'a Sample> {
        let bucket = dataset.class(class);
        self.sets[set][class].iter().map(|&i| &bucket[i]).collect()
    }

    /// Total number of stored mini-batches (`count * classes`).
    pub fn num_batches(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }
}

/// `count` K-centers selections of `m` samples per class, seeded
/// `derive_seed(seed, "teacher/{s}")`. Features are computed once per class.
pub fn build_teacher_bank(
    dataset: &LabeledDataset,
    feature_fn: &dyn Fn(&Sample) -> Vec<f64>,
    m: usize,
    count: usize,
    seed: u64,
) -> Result<TeacherBank, DistillError> {
    if count == 0 {
        return Err(DistillError::Config("teacher_sets must be >= 1".into()));
    }
    let feats: Vec<Vec<Vec<f64>>> = dataset
        .classes()
        .iter()
        .map(|bucket| bucket.iter().map(feature_fn).collect())
        .collect();
    let mut sets = Vec::with_capacity(count);
    for s in 0..count {
        let set_seed = derive_seed(seed, &format!("teacher/{s}"));
        let mut per_class = Vec::with_capacity(feats.len());
        for (c, f) in feats.iter().enumerate() {
            let mut idx = kcenters_indices(f, m, derive_seed(set_seed, &format!("class/{c}")))
                .map_err(|e| match e {
                    crate::coreset::CoresetError::TooFew { k, n, .. } => {
                        crate::coreset::CoresetError::TooFew {
                            k,
                            n,
                            class: Some(c),
                        }
                    }
                    other => other,
                })?;
            idx.sort_unstable();
            per_class.push(idx);
        }
        sets.push(per_class);
    }
    Ok(TeacherBank { sets, batch: m })
}
