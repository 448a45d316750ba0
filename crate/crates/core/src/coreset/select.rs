use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans, sq_dist, DEFAULT_MAX_ITERS};
use super::CoresetError;
use crate::seeds::{derive_seed, rng_from};
use crate::text::{LabeledDataset, Sample};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Random,
    Kcenters,
    Herding,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Random => "random",
            Strategy::Kcenters => "kcenters",
            Strategy::Herding => "herding",
        })
    }
}

/// Per-class indices into the source dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub strategy: Strategy,
    pub seed: Option<u64>,
    pub per_class: Vec<Vec<usize>>,
}

fn check_k(k: usize, n: usize, class: Option<usize>) -> Result<(), CoresetError> {
    if k == 0 {
        return Err(CoresetError::ZeroK);
    }
    if k > n {
        return Err(CoresetError::TooFew { k, n, class });
    }
    Ok(())
}

/// `k` distinct indices drawn uniformly without replacement, ascending.
pub fn random_indices(n: usize, k: usize, seed: u64) -> Result<Vec<usize>, CoresetError> {
    check_k(k, n, None)?;
    let mut rng = rng_from(seed);
    let mut idx = index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// For each k-means centroid, the member point nearest to it (lowest index
/// on ties). A centroid left without members takes the nearest point not
/// already selected.
pub fn kcenters_indices(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
) -> Result<Vec<usize>, CoresetError> {
    check_k(k, points.len(), None)?;
    let clusters = kmeans(points, k, DEFAULT_MAX_ITERS, seed)?;
    let mut selected = vec![false; points.len()];
    let mut out = Vec::with_capacity(k);
    for (j, c) in clusters.centroids.iter().enumerate() {
        let members: Vec<usize> = clusters.members(j).collect();
        let pool: Box<dyn Iterator<Item = usize>> = if members.is_empty() {
            Box::new((0..points.len()).filter(|&i| !selected[i]))
        } else {
            Box::new(members.into_iter())
        };
        let mut best: Option<(usize, f64)> = None;
        for i in pool {
            let d = sq_dist(&points[i], c);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        let (i, _) = best.expect("non-empty candidate pool");
        selected[i] = true;
        out.push(i);
    }
    Ok(out)
}

/// Greedy herding: step j adds the unselected point that brings the mean of
/// the selection closest to the mean of all points. Indices in pick order.
pub fn herding_indices(points: &[Vec<f64>], k: usize) -> Result<Vec<usize>, CoresetError> {
    check_k(k, points.len(), None)?;
    let dim = points[0].len();
    let n = points.len() as f64;
    let mu: Vec<f64> = (0..dim)
        .map(|d| points.iter().map(|p| p[d]).sum::<f64>() / n)
        .collect();
    let mut sum = vec![0.0; dim];
    let mut used = vec![false; points.len()];
    let mut out = Vec::with_capacity(k);
    let mut cand = vec![0.0; dim];
    for j in 1..=k {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            if used[i] {
                continue;
            }
            for d in 0..dim {
                cand[d] = (sum[d] + p[d]) / j as f64;
            }
            let dist = sq_dist(&mu, &cand);
            if best.is_none_or(|(_, bd)| dist < bd) {
                best = Some((i, dist));
            }
        }
        let (i, _) = best.expect("k <= n");
        used[i] = true;
        for d in 0..dim {
            sum[d] += points[i][d];
        }
        out.push(i);
    }
    Ok(out)
}

fn per_class<F>(
    dataset: &LabeledDataset,
    k: usize,
    mut pick: F,
) -> Result<Vec<Vec<usize>>, CoresetError>
where
    F: FnMut(usize, &[Sample]) -> Result<Vec<usize>, CoresetError>,
{
    (0..dataset.num_classes())
        .map(|c| {
            let bucket = dataset.class(c);
            check_k(k, bucket.len(), Some(c))?;
            pick(c, bucket)
        })
        .collect()
}

pub fn random_select(
    dataset: &LabeledDataset,
    k_per_class: usize,
    seed: u64,
) -> Result<SelectionResult, CoresetError> {
    let per_class = per_class(dataset, k_per_class, |c, bucket| {
        random_indices(
            bucket.len(),
            k_per_class,
            derive_seed(seed, &format!("class/{c}")),
        )
    })?;
    Ok(SelectionResult {
        strategy: Strategy::Random,
        seed: Some(seed),
        per_class,
    })
}

pub fn kcenters_select(
    dataset: &LabeledDataset,
    k_per_class: usize,
    feature_fn: &dyn Fn(&Sample) -> Vec<f64>,
    seed: u64,
) -> Result<SelectionResult, CoresetError> {
    let per_class = per_class(dataset, k_per_class, |c, bucket| {
        let feats: Vec<Vec<f64>> = bucket.iter().map(feature_fn).collect();
        kcenters_indices(
            &feats,
            k_per_class,
            derive_seed(seed, &format!("class/{c}")),
        )
    })?;
    Ok(SelectionResult {
        strategy: Strategy::Kcenters,
        seed: Some(seed),
        per_class,
    })
}

pub fn herding_select(
    dataset: &LabeledDataset,
    k_per_class: usize,
    feature_fn: &dyn Fn(&Sample) -> Vec<f64>,
) -> Result<SelectionResult, CoresetError> {
    let per_class = per_class(dataset, k_per_class, |_, bucket| {
        let feats: Vec<Vec<f64>> = bucket.iter().map(feature_fn).collect();
        herding_indices(&feats, k_per_class)
    })?;
    Ok(SelectionResult {
        strategy: Strategy::Herding,
        seed: None,
        per_class,
    })
}

pub fn select(
    dataset: &LabeledDataset,
    strategy: Strategy,
    k_per_class: usize,
    feature_fn: &dyn Fn(&Sample) -> Vec<f64>,
    seed: u64,
) -> Result<SelectionResult, CoresetError> {
    match strategy {
        Strategy::Random => random_select(dataset, k_per_class, seed),
        Strategy::Kcenters => kcenters_select(dataset, k_per_class, feature_fn, seed),
        Strategy::Herding => herding_select(dataset, k_per_class, feature_fn),
    }
}
