//! Shared oracles and instance builders for the integration tests and the
//! acceptance run.
#![allow(dead_code)]

use std::sync::Arc;

use distill_lab::autodiff::{AutodiffError, Graph, ParamSet, Tensor, Var};
use distill_lab::coreset::{
    herding_indices, kcenters_indices, kcenters_select, kmeans, sq_dist, DEFAULT_MAX_ITERS,
};
use distill_lab::distill::{
    direct_backward, gm_loss_value, policy_gradient_backward, syn_weights, ClassBatch,
};
use distill_lab::models::{
    nucleus, sample_index, Arch, FlatGradient, GeneratorConfig, GeneratorModel, LearnerConfig,
    LearnerModel,
};
use distill_lab::seeds::{derive_seed, rng_from, Rng};
use distill_lab::text::{
    encode_for_generator, make_synthetic_task, LabeledDataset, Sample, TaskKind, Vocab,
};
use rand::seq::SliceRandom;
use rand::Rng as _;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;
/// Gradients smaller than this are compared in absolute terms.
pub const FD_FLOOR: f64 = 1e-3;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

pub fn rand_tensor(rng: &mut Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.5..1.5))
}

/// Entries bounded away from zero, for ops with a kink there.
fn rand_away_from_zero(rng: &mut Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let v: f64 = rng.gen_range(0.05..1.5);
        if rng.gen_bool(0.5) {
            v
        } else {
            -v
        }
    })
}

type Build<'a> = dyn Fn(&mut Graph, &[Var]) -> Result<Var, AutodiffError> + 'a;

/// Max relative error between reverse-mode and central-difference
/// gradients of the scalar `build(leaves)` over every leaf entry.
pub fn check_leaves(leaves: &[Tensor], build: &Build<'_>) -> Result<f64, String> {
    let mut g = Graph::new();
    let vars: Vec<Var> = leaves.iter().map(|t| g.leaf(t.clone())).collect();
    let out = build(&mut g, &vars).map_err(|e| e.to_string())?;
    g.backward(out).map_err(|e| e.to_string())?;
    let analytic: Vec<Vec<f64>> = vars.iter().map(|&v| g.grad(v).data().to_vec()).collect();
    let eval = |ls: &[Tensor]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = ls.iter().map(|t| g.constant(t.clone())).collect();
        let out = build(&mut g, &vars).expect("same shapes as the analytic pass");
        g.value(out).item()
    };
    let mut worst: f64 = 0.0;
    let mut work = leaves.to_vec();
    for (l, grads) in analytic.iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let x = leaves[l].data()[i];
            work[l].data_mut()[i] = x + FD_STEP;
            let up = eval(&work);
            work[l].data_mut()[i] = x - FD_STEP;
            let down = eval(&work);
            work[l].data_mut()[i] = x;
            worst = worst.max(rel_err(a, (up - down) / (2.0 * FD_STEP)));
        }
    }
    Ok(worst)
}

/// Reduces any tensor to a scalar with fixed random weights, so every
/// output entry reaches the gradient.
fn readout(g: &mut Graph, out: Var, seed: u64) -> Result<Var, AutodiffError> {
    let shape = g.value(out).shape().to_vec();
    let mut rng = rng_from(seed);
    let r = g.constant(rand_tensor(&mut rng, &shape));
    g.dot(out, r)
}

pub const OPS: &[&str] = &[
    "add",
    "sub",
    "mul",
    "scale",
    "add_scalar",
    "add_row",
    "matmul",
    "tanh",
    "relu",
    "sigmoid",
    "exp",
    "softmax",
    "log_softmax",
    "pick",
    "gather_rows",
    "segment_mean",
    "sum",
    "mean",
    "dot",
    "l2_norm",
    "cos_dist",
    "cross_entropy",
    "weighted_cross_entropy",
    "reshape",
    "transpose",
    "mlp_chain",
];

/// Random instance of op `OPS[op]`; returns the max relative error.
pub fn op_case(op: usize, seed: u64) -> Result<f64, String> {
    let mut rng = rng_from(seed);
    let m = rng.gen_range(1..=4);
    let n = rng.gen_range(1..=4);
    let k = rng.gen_range(1..=4);
    let rs = derive_seed(seed, "readout");
    let mn = [m, n];
    match OPS[op] {
        "add" | "sub" | "mul" => {
            let leaves = [rand_tensor(&mut rng, &mn), rand_tensor(&mut rng, &mn)];
            let name = OPS[op];
            check_leaves(&leaves, &|g, v| {
                let o = match name {
                    "add" => g.add(v[0], v[1])?,
                    "sub" => g.sub(v[0], v[1])?,
                    _ => g.mul(v[0], v[1])?,
                };
                readout(g, o, rs)
            })
        }
        "scale" | "add_scalar" => {
            let c = rng.gen_range(-2.0..2.0);
            let leaves = [rand_tensor(&mut rng, &mn)];
            let name = OPS[op];
            check_leaves(&leaves, &|g, v| {
                let o = if name == "scale" {
                    g.scale(v[0], c)
                } else {
                    g.add_scalar(v[0], c)
                };
                readout(g, o, rs)
            })
        }
        "add_row" => {
            let leaves = [rand_tensor(&mut rng, &mn), rand_tensor(&mut rng, &[n])];
            check_leaves(&leaves, &|g, v| {
                let o = g.add_row(v[0], v[1])?;
                readout(g, o, rs)
            })
        }
        "matmul" => {
            let leaves = [rand_tensor(&mut rng, &mn), rand_tensor(&mut rng, &[n, k])];
            check_leaves(&leaves, &|g, v| {
                let o = g.matmul(v[0], v[1])?;
                readout(g, o, rs)
            })
        }
        "tanh" | "relu" | "sigmoid" | "exp" | "softmax" | "log_softmax" | "l2_norm" => {
            let name = OPS[op];
            let leaves = [if name == "relu" {
                rand_away_from_zero(&mut rng, &mn)
            } else {
                rand_tensor(&mut rng, &mn)
            }];
            check_leaves(&leaves, &|g, v| {
                let o = match name {
                    "tanh" => g.tanh(v[0]),
                    "relu" => g.relu(v[0]),
                    "sigmoid" => g.sigmoid(v[0]),
                    "exp" => g.exp(v[0]),
                    "softmax" => g.softmax(v[0]),
                    "log_softmax" => g.log_softmax(v[0]),
                    _ => g.l2_norm(v[0]),
                };
                readout(g, o, rs)
            })
        }
        "pick" => {
            let idx: Vec<Option<usize>> = (0..m)
                .map(|_| rng.gen_bool(0.8).then(|| rng.gen_range(0..n)))
                .collect();
            let leaves = [rand_tensor(&mut rng, &mn)];
            check_leaves(&leaves, &|g, v| {
                let o = g.pick(v[0], &idx)?;
                readout(g, o, rs)
            })
        }
        "gather_rows" => {
            let ids: Vec<usize> = (0..rng.gen_range(1..=6))
                .map(|_| rng.gen_range(0..m))
                .collect();
            let leaves = [rand_tensor(&mut rng, &mn)];
            check_leaves(&leaves, &|g, v| {
                let o = g.gather_rows(v[0], &ids)?;
                readout(g, o, rs)
            })
        }
        "segment_mean" => {
            let segs: Vec<(usize, usize)> = (0..rng.gen_range(1..=3))
                .map(|_| {
                    let lo = rng.gen_range(0..m);
                    (lo, rng.gen_range(lo + 1..=m))
                })
                .collect();
            let leaves = [rand_tensor(&mut rng, &mn)];
            check_leaves(&leaves, &|g, v| {
                let o = g.segment_mean(v[0], &segs)?;
                readout(g, o, rs)
            })
        }
        "sum" | "mean" => {
            let name = OPS[op];
            let leaves = [rand_tensor(&mut rng, &mn)];
            check_leaves(&leaves, &|g, v| {
                let s = if name == "sum" {
                    g.sum(v[0])
                } else {
                    g.mean(v[0])
                };
                // square so the gradient depends on the value
                g.mul(s, s)
            })
        }
        "dot" | "cos_dist" => {
            let name = OPS[op];
            let leaves = [rand_tensor(&mut rng, &mn), rand_tensor(&mut rng, &mn)];
            check_leaves(&leaves, &|g, v| {
                if name == "dot" {
                    g.dot(v[0], v[1])
                } else {
                    g.cos_dist(v[0], v[1])
                }
            })
        }
        "cross_entropy" | "weighted_cross_entropy" => {
            let c = n.max(2);
            let labels: Vec<usize> = (0..m).map(|_| rng.gen_range(0..c)).collect();
            let weights: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
            let weighted = OPS[op] == "weighted_cross_entropy";
            let leaves = [rand_tensor(&mut rng, &[m, c])];
            check_leaves(&leaves, &|g, v| {
                if weighted {
                    g.weighted_cross_entropy(v[0], &labels, &weights)
                } else {
                    g.cross_entropy(v[0], &labels)
                }
            })
        }
        "reshape" | "transpose" => {
            let name = OPS[op];
            let leaves = [rand_tensor(&mut rng, &mn)];
            check_leaves(&leaves, &|g, v| {
                let o = if name == "reshape" {
                    g.reshape(v[0], &[n, m])?
                } else {
                    g.transpose(v[0])?
                };
                // non-linear readout exposes index mix-ups
                let o = g.tanh(o);
                readout(g, o, rs)
            })
        }
        "mlp_chain" => {
            let c = k.max(2);
            let labels: Vec<usize> = (0..m).map(|_| rng.gen_range(0..c)).collect();
            let leaves = [
                rand_tensor(&mut rng, &mn),
                rand_tensor(&mut rng, &[n, c]),
                rand_tensor(&mut rng, &[c]),
            ];
            check_leaves(&leaves, &|g, v| {
                let h = g.matmul(v[0], v[1])?;
                let h = g.add_row(h, v[2])?;
                let h = g.tanh(h);
                let ls = g.log_softmax(h);
                let idx: Vec<Option<usize>> = labels.iter().map(|&l| Some(l)).collect();
                let p = g.pick(ls, &idx)?;
                let s = g.sum(p);
                let n2 = g.l2_norm(h);
                g.add(s, n2)
            })
        }
        other => Err(format!("unknown op {other}")),
    }
}

pub type LossFn<'a> = dyn Fn(&mut Graph, &[Var]) -> Result<Var, String> + 'a;

/// Max relative error over `coords` entries of the flattened parameters.
pub fn check_params(
    params: &ParamSet,
    coords: &[usize],
    loss: &LossFn<'_>,
) -> Result<f64, String> {
    let mut g = Graph::new();
    let p = params.bind(&mut g);
    let out = loss(&mut g, &p)?;
    g.backward(out).map_err(|e| e.to_string())?;
    let analytic: Vec<f64> = p.iter().flat_map(|&v| g.grad(v).data().to_vec()).collect();
    let base = params.flat_values();
    let eval = |flat: &[f64]| -> f64 {
        let mut ps = params.clone();
        ps.set_flat_values(flat).expect("same length");
        let mut g = Graph::new();
        let p = ps.bind_const(&mut g);
        let out = loss(&mut g, &p).expect("same shapes as the analytic pass");
        g.value(out).item()
    };
    let mut worst: f64 = 0.0;
    let mut work = base.clone();
    for &i in coords {
        work[i] = base[i] + FD_STEP;
        let up = eval(&work);
        work[i] = base[i] - FD_STEP;
        let down = eval(&work);
        work[i] = base[i];
        worst = worst.max(rel_err(analytic[i], (up - down) / (2.0 * FD_STEP)));
    }
    Ok(worst)
}

pub const MODEL_LOSSES: &[&str] = &["learner-a", "learner-b", "generator"];

/// Short samples from a random small task, both single and pair.
pub fn small_samples(rng: &mut Rng, count: usize) -> (Arc<Vocab>, Vec<Sample>) {
    let kind = if rng.gen_bool(0.5) {
        TaskKind::Keyword
    } else {
        TaskKind::PairMatch
    };
    let data = make_synthetic_task(kind, count, rng.gen()).expect("synthetic task");
    let mut all: Vec<Sample> = data.iter().cloned().collect();
    all.shuffle(rng);
    all.truncate(count);
    for s in &mut all {
        s.truncate(rng.gen_range(1..=5));
    }
    (data.vocab().clone(), all)
}

/// Random instance of a model loss, checked on `n_coords` random parameter
/// entries (all of them when smaller).
pub fn model_case(which: usize, seed: u64, n_coords: usize) -> Result<f64, String> {
    let mut rng = rng_from(seed);
    let count = rng.gen_range(1..=3);
    let (vocab, samples) = small_samples(&mut rng, count);
    let pick_coords = |total: usize, rng: &mut Rng| -> Vec<usize> {
        if total <= n_coords {
            (0..total).collect()
        } else {
            rand::seq::index::sample(rng, total, n_coords).into_vec()
        }
    };
    match MODEL_LOSSES[which] {
        "learner-a" | "learner-b" => {
            let arch = if which == 0 { Arch::A } else { Arch::B };
            let cfg = LearnerConfig {
                arch,
                embed: 3,
                hidden: 4,
            };
            let model = LearnerModel::new(cfg, vocab, rng.gen());
            let weights: Vec<f64> = samples.iter().map(|_| rng.gen_range(0.1..1.0)).collect();
            let coords = pick_coords(model.params.num_scalars(), &mut rng);
            check_params(&model.params, &coords, &|g, p| {
                model
                    .batch_loss(g, p, &samples, &weights)
                    .map_err(|e| e.to_string())
            })
        }
        _ => {
            let cfg = GeneratorConfig {
                embed: 3,
                hidden: 4,
            };
            let model = GeneratorModel::new(cfg, vocab.clone(), rng.gen());
            let seqs: Vec<Vec<usize>> = samples
                .iter()
                .map(|s| encode_for_generator(s, &vocab).expect("valid sample"))
                .collect();
            let coords = pick_coords(model.params.num_scalars(), &mut rng);
            check_params(&model.params, &coords, &|g, p| {
                model.lm_loss_batch(g, p, &seqs).map_err(|e| e.to_string())
            })
        }
    }
}

/// Largest per-parameter disagreement between the closed-form reward route
/// and direct differentiation, relative to `max(|g|, 1e-6 * max|g|)`.
pub fn policy_identity_case(seed: u64, n: usize, length_normalize: bool) -> Result<f64, String> {
    let mut rng = rng_from(seed);
    let data = make_synthetic_task(TaskKind::Keyword, 24, rng.gen()).map_err(|e| e.to_string())?;
    let vocab = data.vocab().clone();
    let gen = GeneratorModel::new(
        GeneratorConfig {
            embed: 4,
            hidden: 6,
        },
        vocab.clone(),
        rng.gen(),
    );
    let learner = LearnerModel::new(
        LearnerConfig {
            arch: if rng.gen_bool(0.5) { Arch::A } else { Arch::B },
            embed: 4,
            hidden: 5,
        },
        vocab,
        rng.gen(),
    );
    let mut real = Vec::new();
    let mut syn = Vec::new();
    for c in 0..data.num_classes() {
        let mut bucket = data.class(c).to_vec();
        bucket.shuffle(&mut rng);
        real.push(bucket[..rng.gen_range(1..=6)].to_vec());
        syn.push(bucket[8..8 + n].to_vec());
    }
    let batches: Vec<ClassBatch<'_>> = real
        .iter()
        .zip(&syn)
        .map(|(r, s)| ClassBatch {
            real: r,
            synthetic: s,
        })
        .collect();
    let mut direct = gen.clone();
    direct.params.zero_grads();
    direct_backward(&mut direct, &learner, &batches, length_normalize)
        .map_err(|e| e.to_string())?;
    let mut pg = gen;
    pg.params.zero_grads();
    policy_gradient_backward(&mut pg, &learner, &batches, length_normalize)
        .map_err(|e| e.to_string())?;
    let a = direct.params.flat_grads();
    let b = pg.params.flat_grads();
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return Err("direct gradient is identically zero".into());
    }
    Ok(a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(1e-6 * scale))
        .fold(0.0, f64::max))
}

/// Two blobs of uniform noise in `[-spread, spread]^d` whose centers are
/// `ratio * spread` apart; labels are blob membership.
pub fn two_blobs(seed: u64, ratio: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = rng_from(seed);
    let d = rng.gen_range(1..=4);
    let spread = rng.gen_range(0.01..2.0);
    let offset: Vec<f64> = (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect();
    let mut dir: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
    dir.iter_mut().for_each(|x| *x /= norm);
    let sizes = [rng.gen_range(2..=40), rng.gen_range(2..=40)];
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for (b, &size) in sizes.iter().enumerate() {
        for _ in 0..size {
            pts.push(
                (0..d)
                    .map(|j| {
                        offset[j]
                            + b as f64 * ratio * spread * dir[j]
                            + rng.gen_range(-spread..spread)
                    })
                    .collect(),
            );
            labels.push(b);
        }
    }
    (pts, labels)
}

pub fn same_partition(assign: &[usize], labels: &[usize]) -> bool {
    let map0 = assign[labels.iter().position(|&l| l == 0).unwrap()];
    assign
        .iter()
        .zip(labels)
        .all(|(&a, &l)| (a == map0) == (l == 0))
}

/// A dataset whose sample `i` (in both classes) decodes back to `i`, so a
/// feature table can stand in for a feature extractor.
pub fn indexed_dataset(n: usize) -> (LabeledDataset, usize) {
    let vocab = Arc::new(TaskKind::Keyword.vocab());
    let base = vocab.n_content();
    assert!(n <= base * base);
    let buckets = (0..2)
        .map(|c| {
            (0..n)
                .map(|i| Sample::single(vec![i / base, i % base], c))
                .collect()
        })
        .collect();
    (LabeledDataset::from_buckets(vocab, buckets).unwrap(), base)
}

/// Empirical frequencies of `draws` nucleus samples against the truncated
/// distribution; returns the largest deviation in standard errors.
pub fn nucleus_z(probs: &[f64], top_p: f64, draws: usize, seed: u64) -> f64 {
    let dist = nucleus(probs, top_p);
    let mut expected = vec![0.0; probs.len()];
    for &(i, p) in &dist {
        expected[i] = p;
    }
    let mut rng = rng_from(seed);
    let mut counts = vec![0usize; probs.len()];
    for _ in 0..draws {
        counts[sample_index(&dist, &mut rng)] += 1;
    }
    let mut worst: f64 = 0.0;
    for (c, q) in counts.iter().zip(&expected) {
        let f = *c as f64 / draws as f64;
        if *q == 0.0 {
            if *c > 0 {
                return f64::INFINITY;
            }
            continue;
        }
        let sigma = (q * (1.0 - q) / draws as f64).sqrt().max(1e-12);
        worst = worst.max((f - q).abs() / sigma);
    }
    worst
}

/// Every herding step picks an unselected point minimizing the distance
/// between the running selection mean and the full mean (exhaustive scan).
pub fn herding_check(pts: &[Vec<f64>], k: usize) -> Result<(), String> {
    let picked = herding_indices(pts, k).map_err(|e| e.to_string())?;
    let d = pts[0].len();
    let n = pts.len() as f64;
    let mu: Vec<f64> = (0..d)
        .map(|j| pts.iter().map(|p| p[j]).sum::<f64>() / n)
        .collect();
    let mut sum = vec![0.0; d];
    let mut used = vec![false; pts.len()];
    for (step, &chosen) in picked.iter().enumerate() {
        if used[chosen] {
            return Err(format!("step {step} repeats {chosen}"));
        }
        let j = (step + 1) as f64;
        let cost = |i: usize| -> f64 {
            let m: Vec<f64> = (0..d).map(|t| (sum[t] + pts[i][t]) / j).collect();
            sq_dist(&m, &mu)
        };
        let best = (0..pts.len())
            .filter(|&i| !used[i])
            .map(cost)
            .fold(f64::INFINITY, f64::min);
        if cost(chosen) > best + 1e-9 * (1.0 + best) {
            return Err(format!("step {step}: {} > {best}", cost(chosen)));
        }
        used[chosen] = true;
        for t in 0..d {
            sum[t] += pts[chosen][t];
        }
    }
    Ok(())
}

/// K-centers returns `k` distinct points, each the member nearest its
/// k-means centroid.
pub fn kcenters_check(pts: &[Vec<f64>], k: usize, seed: u64) -> Result<(), String> {
    let picked = kcenters_indices(pts, k, seed).map_err(|e| e.to_string())?;
    let clusters = kmeans(pts, k, DEFAULT_MAX_ITERS, seed).map_err(|e| e.to_string())?;
    let mut sorted = picked.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != k {
        return Err(format!("{} distinct picks for k = {k}", sorted.len()));
    }
    for (j, c) in clusters.centroids.iter().enumerate() {
        let members: Vec<usize> = clusters.members(j).collect();
        if members.is_empty() {
            continue;
        }
        if !members.contains(&picked[j]) {
            return Err(format!("pick {j} is outside its cluster"));
        }
        let best = members
            .iter()
            .map(|&i| sq_dist(&pts[i], c))
            .fold(f64::INFINITY, f64::min);
        if sq_dist(&pts[picked[j]], c) > best + 1e-12 {
            return Err(format!("pick {j} is not nearest its centroid"));
        }
    }
    Ok(())
}

/// Inertia never increases across Lloyd iterations and matches the final
/// assignment.
pub fn lloyd_check(pts: &[Vec<f64>], k: usize, seed: u64) -> Result<(), String> {
    let r = kmeans(pts, k, DEFAULT_MAX_ITERS, seed).map_err(|e| e.to_string())?;
    for w in r.trace.windows(2) {
        if w[1] > w[0] * (1.0 + 1e-12) + 1e-12 {
            return Err(format!("inertia rose {} -> {}", w[0], w[1]));
        }
    }
    let direct: f64 = pts
        .iter()
        .zip(&r.assignment)
        .map(|(p, &a)| sq_dist(p, &r.centroids[a]))
        .sum();
    if (direct - r.inertia).abs() > 1e-9 * (1.0 + direct) {
        return Err(format!("inertia {} vs {direct}", r.inertia));
    }
    Ok(())
}

/// k-means and kcenters_select both split two separated blobs correctly.
pub fn blob_check(seed: u64, ratio: f64) -> Result<(), String> {
    let (pts, labels) = two_blobs(seed, ratio);
    let r = kmeans(&pts, 2, DEFAULT_MAX_ITERS, seed).map_err(|e| e.to_string())?;
    if !same_partition(&r.assignment, &labels) {
        return Err("k-means split a blob".into());
    }
    let (data, base) = indexed_dataset(pts.len());
    let feature = |s: &Sample| pts[s.tokens[0] * base + s.tokens[1]].clone();
    let sel = kcenters_select(&data, 2, &feature, seed).map_err(|e| e.to_string())?;
    let mut blobs: Vec<usize> = sel.per_class[0].iter().map(|&i| labels[i]).collect();
    blobs.sort_unstable();
    if blobs != [0, 1] {
        return Err("kcenters_select missed a blob".into());
    }
    Ok(())
}

/// Nonnegative, normalized, shift-invariant sample weights.
pub fn weight_law_check(lp: &[f64], shift: f64) -> Result<(), String> {
    let a = syn_weights(lp, None);
    if a.iter().any(|&x| x < 0.0) {
        return Err("negative weight".into());
    }
    let s = a.iter().sum::<f64>();
    if (s - 1.0).abs() >= 1e-12 {
        return Err(format!("weights sum to {s}"));
    }
    let shifted: Vec<f64> = lp.iter().map(|x| x + shift).collect();
    let b = syn_weights(&shifted, None);
    if a.iter().zip(&b).any(|(x, y)| (x - y).abs() >= 1e-12) {
        return Err("weights change under a shift".into());
    }
    Ok(())
}

/// Matching distance lies in [0, 2], vanishes for positive rescaling and
/// reaches 2 for negation.
pub fn distance_law_check(g: &[f64], h: &[f64], c: f64) -> Result<(), String> {
    let fg = FlatGradient(g.to_vec());
    let d = gm_loss_value(&fg, &FlatGradient(h.to_vec())).map_err(|e| e.to_string())?;
    if !(0.0..=2.0).contains(&d) {
        return Err(format!("distance {d}"));
    }
    let scaled = FlatGradient(g.iter().map(|x| c * x).collect());
    let same = gm_loss_value(&fg, &scaled).map_err(|e| e.to_string())?;
    if same.abs() >= 1e-12 {
        return Err(format!("distance to c*g is {same}"));
    }
    let flipped = FlatGradient(g.iter().map(|x| -c * x).collect());
    let opposite = gm_loss_value(&fg, &flipped).map_err(|e| e.to_string())?;
    if (opposite - 2.0).abs() >= 1e-12 {
        return Err(format!("distance to -c*g is {opposite}"));
    }
    Ok(())
}
