//! K-means and the three selection strategies (random, K-centers, herding).
//!
//! "K-centers" here means: cluster with k-means, then keep the real point
//! nearest each centroid. It is not the greedy max-min k-center algorithm.

mod kmeans;
mod select;

pub use kmeans::{kmeans, sq_dist, ClusterResult, DEFAULT_MAX_ITERS};
pub use select::{
    herding_indices, herding_select, kcenters_indices, kcenters_select, random_indices,
    random_select, select, SelectionResult, Strategy,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CoresetError {
    #[error("requested {k} points from {n}{}", .class.map(|c| format!(" in class {c}")).unwrap_or_default())]
    TooFew {
        k: usize,
        n: usize,
        class: Option<usize>,
    },
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("k must be at least 1")]
    ZeroK,
}
