use rand::Rng;

use super::CoresetError;
use crate::seeds::{derive_seed, rng_from};

pub const DEFAULT_MAX_ITERS: usize = 100;
/// Independent seedings per call; the lowest final inertia wins.
pub const RESTARTS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterResult {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
    /// Inertia after each Lloyd iteration.
    pub trace: Vec<f64>,
}

impl ClusterResult {
    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(move |(_, &a)| a == cluster)
            .map(|(i, _)| i)
    }
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid, lowest index on ties.
fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let assignment = points
        .iter()
        .map(|p| {
            let (j, d) = nearest(p, centroids);
            inertia += d;
            j
        })
        .collect();
    (assignment, inertia)
}

/// Greedy k-means++: each new centre is the best of `2 + ln k` candidates
/// drawn by squared distance, scored by the resulting potential.
fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let trials = 2 + (k as f64).ln() as usize;
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut best: Option<(usize, f64)> = None;
            for _ in 0..trials {
                let cand = draw_by_weight(&d2, total, rng);
                let potential: f64 = d2
                    .iter()
                    .zip(points)
                    .map(|(d, p)| d.min(sq_dist(p, &points[cand])))
                    .sum();
                if best.is_none_or(|(_, bp)| potential < bp) {
                    best = Some((cand, potential));
                }
            }
            best.expect("at least one trial").0
        } else {
            // every remaining point coincides with a centre
            chosen.iter().position(|c| !c).unwrap()
        };
        chosen[pick] = true;
        centroids.push(points[pick].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[pick]));
        }
    }
    centroids
}

fn draw_by_weight(w: &[f64], total: f64, rng: &mut impl Rng) -> usize {
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, d) in w.iter().enumerate() {
        acc += d;
        if u < acc && *d > 0.0 {
            return i;
        }
    }
    // rounding can run past the end of the cumulative sum
    w.iter().rposition(|&d| d > 0.0).unwrap()
}

fn means(points: &[Vec<f64>], assignment: &[usize], old: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = old.len();
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignment) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(p) {
            *s += x;
        }
    }
    let mut centroids: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .zip(old)
        .map(|((s, &c), o)| {
            if c == 0 {
                o.clone()
            } else {
                s.into_iter().map(|x| x / c as f64).collect()
            }
        })
        .collect();
    // Empty clusters take the point farthest from its own centroid, drawn
    // from clusters that can spare one.
    let mut taken = vec![false; points.len()];
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, (p, &a)) in points.iter().zip(assignment).enumerate() {
            if taken[i] || counts[a] < 2 {
                continue;
            }
            let d = sq_dist(p, &centroids[a]);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        if let Some((i, _)) = best {
            taken[i] = true;
            counts[assignment[i]] -= 1;
            counts[j] = 1;
            centroids[j] = points[i].clone();
        }
    }
    centroids
}

/// k-means++ seeding followed by Lloyd iterations until the assignment is
/// a fixpoint or `max_iters` is reached, best of [`RESTARTS`] runs.
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    max_iters: usize,
    seed: u64,
) -> Result<ClusterResult, CoresetError> {
    if k == 0 {
        return Err(CoresetError::ZeroK);
    }
    if k > points.len() {
        return Err(CoresetError::TooFew {
            k,
            n: points.len(),
            class: None,
        });
    }
    if let Some(i) = points.iter().position(|p| p.iter().any(|x| !x.is_finite())) {
        return Err(CoresetError::NonFinite(i));
    }
    let mut best: Option<ClusterResult> = None;
    for restart in 0..RESTARTS {
        let mut rng = rng_from(derive_seed(seed, &format!("restart/{restart}")));
        let run = lloyd(points, k, max_iters, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn lloyd(points: &[Vec<f64>], k: usize, max_iters: usize, rng: &mut impl Rng) -> ClusterResult {
    let mut centroids = plus_plus_init(points, k, rng);
    let (mut assignment, mut inertia) = assign(points, &centroids);
    let mut trace = vec![inertia];
    for _ in 0..max_iters {
        centroids = means(points, &assignment, &centroids);
        let (next, next_inertia) = assign(points, &centroids);
        trace.push(next_inertia);
        inertia = next_inertia;
        if next == assignment {
            break;
        }
        assignment = next;
    }
    ClusterResult {
        centroids,
        assignment,
        inertia,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_equals_n_has_zero_inertia() {
        let pts = vec![
            vec![0.0, 1.0],
            vec![3.0, -1.0],
            vec![5.0, 5.0],
            vec![-2.0, 0.5],
        ];
        let r = kmeans(&pts, 4, 100, 3).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut a = r.assignment.clone();
        a.sort();
        a.dedup();
        assert_eq!(a.len(), 4);
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(&r.centroids[r.assignment[i]], p);
        }
    }

    #[test]
    fn rejects_k_above_n() {
        let pts = vec![vec![0.0]; 3];
        assert!(matches!(
            kmeans(&pts, 4, 10, 0),
            Err(CoresetError::TooFew { .. })
        ));
    }

    #[test]
    fn duplicate_points_do_not_hang() {
        let pts = vec![vec![1.0, 1.0]; 6];
        let r = kmeans(&pts, 3, 20, 1).unwrap();
        assert_eq!(r.inertia, 0.0);
        assert_eq!(r.assignment.len(), 6);
    }

    #[test]
    fn same_seed_same_result() {
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i * 7 % 13) as f64, (i * 5 % 11) as f64])
            .collect();
        assert_eq!(
            kmeans(&pts, 5, 100, 9).unwrap(),
            kmeans(&pts, 5, 100, 9).unwrap()
        );
    }
}
