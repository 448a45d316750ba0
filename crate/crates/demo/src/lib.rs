//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Three panels: nucleus sampling over an editable next-token distribution,
//! k-means / K-centers / herding on 2D blobs, and sample weights and rewards
//! for hand-placed per-sample gradients.

use distill_lab::coreset::{
    herding_indices, kcenters_indices, kmeans, random_indices, DEFAULT_MAX_ITERS,
};
use distill_lab::distill::{closed_form_rewards, syn_weights};
use distill_lab::models::{nucleus, sample_index, FlatGradient};
use distill_lab::seeds::rng_from;
use rand_distr::{Distribution, Normal};
use wasm_bindgen::prelude::*;

/// Top-p truncated and renormalized distribution, same length as `probs`.
#[wasm_bindgen]
pub fn nucleus_distribution(probs: Vec<f64>, top_p: f64) -> Vec<f64> {
    let mut out = vec![0.0; probs.len()];
    for (i, p) in nucleus(&probs, top_p) {
        out[i] = p;
    }
    out
}

/// Counts per token over `draws` samples from the nucleus distribution.
#[wasm_bindgen]
pub fn nucleus_counts(probs: Vec<f64>, top_p: f64, draws: u32, seed: u32) -> Vec<u32> {
    let dist = nucleus(&probs, top_p);
    let mut rng = rng_from(seed as u64);
    let mut counts = vec![0u32; probs.len()];
    for _ in 0..draws {
        counts[sample_index(&dist, &mut rng)] += 1;
    }
    counts
}

/// Gaussian blobs in the unit square.
#[wasm_bindgen]
pub struct Blobs {
    points: Vec<Vec<f64>>,
}

#[wasm_bindgen]
impl Blobs {
    /// `blobs` centers drawn uniformly in [0.15, 0.85]^2, `per_blob` points
    /// each with standard deviation `spread`.
    #[wasm_bindgen(constructor)]
    pub fn new(blobs: u32, per_blob: u32, spread: f64, seed: u32) -> Blobs {
        use rand::Rng;
        let mut rng = rng_from(seed as u64);
        let noise = Normal::new(0.0, spread.max(0.0)).expect("finite spread");
        let mut points = Vec::with_capacity((blobs * per_blob) as usize);
        for _ in 0..blobs {
            let cx = rng.gen_range(0.15..0.85);
            let cy = rng.gen_range(0.15..0.85);
            for _ in 0..per_blob {
                points.push(vec![
                    cx + noise.sample(&mut rng),
                    cy + noise.sample(&mut rng),
                ]);
            }
        }
        Blobs { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `[x0, y0, x1, y1, ...]`.
    pub fn coords(&self) -> Vec<f64> {
        self.points.iter().flatten().copied().collect()
    }

    /// Cluster index per point; empty when `k` is 0 or exceeds the count.
    pub fn kmeans_assign(&self, k: usize, seed: u32) -> Vec<u32> {
        kmeans(&self.points, k, DEFAULT_MAX_ITERS, seed as u64)
            .map(|r| r.assignment.iter().map(|&a| a as u32).collect())
            .unwrap_or_default()
    }

    /// `[x, y]` per centroid.
    pub fn kmeans_centroids(&self, k: usize, seed: u32) -> Vec<f64> {
        kmeans(&self.points, k, DEFAULT_MAX_ITERS, seed as u64)
            .map(|r| r.centroids.into_iter().flatten().collect())
            .unwrap_or_default()
    }

    /// Indices picked by `random`, `kcenters` or `herding`; empty for an
    /// unknown strategy or an infeasible `k`.
    pub fn select(&self, strategy: &str, k: usize, seed: u32) -> Vec<u32> {
        let picked = match strategy {
            "random" => random_indices(self.points.len(), k, seed as u64),
            "kcenters" => kcenters_indices(&self.points, k, seed as u64),
            "herding" => herding_indices(&self.points, k),
            _ => return Vec::new(),
        };
        picked
            .map(|v| v.into_iter().map(|i| i as u32).collect())
            .unwrap_or_default()
    }
}

/// Matching loss, weights and rewards for `n = log_probs.len()` synthetic
/// samples with `dim`-dimensional gradients `grads` (row-major) against
/// `real`. Returns `[loss, a_0..a_n, r_0..r_n]`; the loss is NaN when a
/// gradient has zero norm.
#[wasm_bindgen]
pub fn matching(real: Vec<f64>, grads: Vec<f64>, log_probs: Vec<f64>) -> Vec<f64> {
    let n = log_probs.len();
    let dim = real.len();
    if n == 0 || dim == 0 || grads.len() != n * dim {
        return Vec::new();
    }
    let a = syn_weights(&log_probs, None);
    let per: Vec<FlatGradient> = grads
        .chunks(dim)
        .map(|c| FlatGradient(c.to_vec()))
        .collect();
    let (loss, rewards) =
        closed_form_rewards(&FlatGradient(real), &per, &a).unwrap_or((f64::NAN, vec![f64::NAN; n]));
    let mut out = Vec::with_capacity(1 + 2 * n);
    out.push(loss);
    out.extend(a);
    out.extend(rewards);
    out
}
