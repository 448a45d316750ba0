use rand::Rng;

/// Nucleus truncation: the smallest prefix of the probability-sorted
/// support whose mass reaches `top_p`, renormalized. Ties sort by index.
/// Returns `(index, probability)` pairs in descending probability.
pub fn nucleus(probs: &[f64], top_p: f64) -> Vec<(usize, f64)> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let mut kept = Vec::new();
    let mut mass = 0.0;
    for i in order {
        kept.push((i, probs[i]));
        mass += probs[i];
        // relative slack absorbs rounding in the running sum
        if mass >= top_p * (1.0 - 1e-12) {
            break;
        }
    }
    for (_, p) in kept.iter_mut() {
        *p /= mass;
    }
    kept
}

/// Inverse-CDF draw from `(index, probability)` pairs summing to one.
pub fn sample_index(dist: &[(usize, f64)], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(i, p) in dist {
        acc += p;
        if u < acc {
            return i;
        }
    }
    dist.last().expect("non-empty distribution").0
}
