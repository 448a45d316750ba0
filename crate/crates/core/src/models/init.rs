use rand::Rng;

use crate::autodiff::Tensor;

/// `U(-bound, bound)` entries.
pub(crate) fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(-bound..=bound))
}

/// Uniform with bound `1/sqrt(fan_in)`.
pub(crate) fn fan_in(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    uniform(&[rows, cols], 1.0 / (rows as f64).sqrt(), rng)
}
