//! Gradient matching between real and probability-weighted synthetic head
//! gradients, and the two routes from that loss back to the generator.
//!
//! Text is discrete, so the only path from the matching loss to the
//! generator parameters runs through the sample weights
//! `a = softmax(log p(x_n))`. The synthetic head gradient is linear in `a`:
//! `g_syn = sum_n a_n g_n`, with per-sample gradients `g_n` held constant.
//!
//! * [`direct_backward`] differentiates `D(g_real, sum_n a_n g_n)` through
//!   the softmax and the sequence log-probabilities on one tape.
//! * [`policy_gradient_backward`] computes per-sample rewards
//!   `r_n = a_n (g_n - g_syn)^T (-dD/dg_syn)` in closed form and
//!   backpropagates `sum_n r_n * l(x_n)` with `l = -log p`, i.e. REINFORCE
//!   with a detached reward.
//!
//! Both produce the same gradient; the second is what training uses.

use crate::autodiff::{cosine_distance, cosine_distance_grad, AutodiffError, Graph, Tensor, Var};
use crate::models::{FlatGradient, GeneratorModel, LearnerModel};
use crate::text::{encode_for_generator, Sample};

use super::DistillError;

/// Real and synthetic batches for one class.
#[derive(Clone, Debug)]
pub struct ClassBatch<'a> {
    pub real: &'a [Sample],
    pub synthetic: &'a [Sample],
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassDiagnostics {
    pub class: usize,
    pub gm_loss: f64,
    pub reward_mean: f64,
    pub reward_std: f64,
    pub weight_entropy: f64,
    pub rewards: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Cosine distance between the real and synthetic head gradients.
pub fn gm_loss_value(real: &FlatGradient, syn: &FlatGradient) -> Result<f64, DistillError> {
    if real.len() != syn.len() {
        return Err(AutodiffError::ShapeMismatch {
            op: "gm_loss",
            lhs: vec![real.len()],
            rhs: vec![syn.len()],
        }
        .into());
    }
    cosine_distance(real.as_slice(), syn.as_slice()).map_err(name_side)
}

/// Graph version: `real` enters as a constant, `syn` is any node of the same
/// length.
pub fn gm_loss(g: &mut Graph, real: &FlatGradient, syn: Var) -> Result<Var, DistillError> {
    let shape = g.value(syn).shape().to_vec();
    let r = g.constant(Tensor::new(shape, real.0.clone())?);
    g.cos_dist(r, syn).map_err(name_side)
}

fn name_side(e: AutodiffError) -> DistillError {
    match e {
        AutodiffError::ZeroNorm { side, .. } => DistillError::ZeroGradient {
            side: if side == "lhs" { "real" } else { "synthetic" },
        },
        other => other.into(),
    }
}

/// Softmax of (optionally length-normalized) sequence log-probabilities.
pub fn syn_weights(log_probs: &[f64], lengths: Option<&[usize]>) -> Vec<f64> {
    let scores: Vec<f64> = match lengths {
        Some(l) => log_probs
            .iter()
            .zip(l)
            .map(|(lp, &n)| lp / n as f64)
            .collect(),
        None => log_probs.to_vec(),
    };
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

pub fn entropy(weights: &[f64]) -> f64 {
    -weights
        .iter()
        .filter(|&&a| a > 0.0)
        .map(|a| a * a.ln())
        .sum::<f64>()
}

/// `L_syn = sum_i a_i CE(x_i)` on a learner graph, with `a` the weights from
/// `log_probs`. Returns the loss node and `a`.
pub fn weighted_syn_loss(
    g: &mut Graph,
    learner: &LearnerModel,
    learner_vars: &[Var],
    samples: &[Sample],
    log_probs: &[f64],
) -> Result<(Var, Vec<f64>), DistillError> {
    if samples.len() != log_probs.len() {
        return Err(AutodiffError::ShapeMismatch {
            op: "weighted_syn_loss",
            lhs: vec![samples.len()],
            rhs: vec![log_probs.len()],
        }
        .into());
    }
    let a = syn_weights(log_probs, None);
    let loss = learner.batch_loss(g, learner_vars, samples, &a)?;
    Ok((loss, a))
}

/// Closed-form matching loss and rewards for one class.
pub fn closed_form_rewards(
    real: &FlatGradient,
    per_sample: &[FlatGradient],
    weights: &[f64],
) -> Result<(f64, Vec<f64>), DistillError> {
    let mut syn = FlatGradient::zeros(real.len());
    for (a, g) in weights.iter().zip(per_sample) {
        syn.add_scaled(*a, g);
    }
    let loss = gm_loss_value(real, &syn)?;
    // dD/dg_syn
    let v = cosine_distance_grad(syn.as_slice(), real.as_slice());
    // (g_n - g_syn) . -v written as sum_m a_m (u_n - u_m), which stays
    // accurate when the weights are nearly one-hot.
    let u: Vec<f64> = per_sample
        .iter()
        .map(|g| -g.0.iter().zip(&v).map(|(gk, vk)| gk * vk).sum::<f64>())
        .collect();
    let rewards = weights
        .iter()
        .zip(&u)
        .map(|(a, un)| {
            let proj: f64 = weights.iter().zip(&u).map(|(am, um)| am * (un - um)).sum();
            a * proj
        })
        .collect();
    Ok((loss, rewards))
}

struct Prepared {
    real: FlatGradient,
    per_sample: Vec<FlatGradient>,
    encoded: Vec<Vec<usize>>,
}

fn prepare(
    gen: &GeneratorModel,
    learner: &LearnerModel,
    batch: &ClassBatch<'_>,
) -> Result<Prepared, DistillError> {
    if batch.real.is_empty() || batch.synthetic.is_empty() {
        return Err(DistillError::EmptyBatch);
    }
    let m = batch.real.len() as f64;
    let real = learner.head_gradient(batch.real, &vec![1.0 / m; batch.real.len()])?;
    let per_sample = learner.per_sample_head_gradients(batch.synthetic)?;
    let encoded = batch
        .synthetic
        .iter()
        .map(|s| encode_for_generator(s, gen.vocab()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Prepared {
        real,
        per_sample,
        encoded,
    })
}

fn length_scale(encoded: &[Vec<usize>], length_normalize: bool) -> Vec<f64> {
    encoded
        .iter()
        .map(|e| {
            if length_normalize {
                1.0 / (e.len() - 1) as f64
            } else {
                1.0
            }
        })
        .collect()
}

/// Reverse-mode route: accumulates `grad_phi (1/C) sum_c D(g_real, sum a g_n)`
/// into `gen.params` and returns the per-class losses.
pub fn direct_backward(
    gen: &mut GeneratorModel,
    learner: &LearnerModel,
    batches: &[ClassBatch<'_>],
    length_normalize: bool,
) -> Result<Vec<f64>, DistillError> {
    let prepared = batches
        .iter()
        .map(|b| prepare(gen, learner, b))
        .collect::<Result<Vec<_>, _>>()?;
    let mut g = Graph::new();
    let p = gen.params.bind(&mut g);
    let c = batches.len() as f64;
    let mut total: Option<Var> = None;
    let mut losses = Vec::with_capacity(batches.len());
    for prep in &prepared {
        let n = prep.encoded.len();
        let col = gen.sequence_log_probs(&mut g, &p, &prep.encoded)?;
        let scale = g.constant(Tensor::matrix(
            n,
            1,
            length_scale(&prep.encoded, length_normalize),
        ));
        let scores = g.mul(col, scale)?;
        let row = g.reshape(scores, &[1, n])?;
        let a = g.softmax(row);
        let width = prep.real.len();
        let stacked = g.constant(Tensor::matrix(
            n,
            width,
            prep.per_sample
                .iter()
                .flat_map(|x| x.0.iter().copied())
                .collect(),
        ));
        let syn = g.matmul(a, stacked)?;
        let loss = gm_loss(&mut g, &prep.real, syn)?;
        losses.push(g.value(loss).item());
        total = Some(match total {
            None => loss,
            Some(t) => g.add(t, loss)?,
        });
    }
    let total = total.ok_or(DistillError::EmptyBatch)?;
    let mean = g.scale(total, 1.0 / c);
    g.backward(mean)?;
    gen.params.accumulate_grads(&g, &p);
    Ok(losses)
}

/// Closed-form reward route: accumulates `grad_phi (1/C) sum_c sum_n r_n l(x_n)`
/// into `gen.params`, with `l(x) = -log p(x)` (divided by the predicted
/// length when `length_normalize`).
pub fn policy_gradient_backward(
    gen: &mut GeneratorModel,
    learner: &LearnerModel,
    batches: &[ClassBatch<'_>],
    length_normalize: bool,
) -> Result<Vec<ClassDiagnostics>, DistillError> {
    let prepared = batches
        .iter()
        .map(|b| prepare(gen, learner, b))
        .collect::<Result<Vec<_>, _>>()?;
    let mut g = Graph::new();
    let p = gen.params.bind(&mut g);
    let c = batches.len() as f64;
    let mut diags = Vec::with_capacity(batches.len());
    let mut total: Option<Var> = None;
    for (class, prep) in prepared.iter().enumerate() {
        let col = gen.sequence_log_probs(&mut g, &p, &prep.encoded)?;
        let scale = length_scale(&prep.encoded, length_normalize);
        let log_probs = g.value(col).data().to_vec();
        let scores: Vec<f64> = log_probs.iter().zip(&scale).map(|(l, s)| l * s).collect();
        let a = syn_weights(&scores, None);
        let (loss, rewards) = closed_form_rewards(&prep.real, &prep.per_sample, &a)?;
        if !loss.is_finite() || rewards.iter().any(|r| !r.is_finite()) {
            return Err(DistillError::NonFinite { class });
        }
        // d/dphi of sum_n r_n * (-s_n log p_n)
        let coef = g.constant(Tensor::matrix(
            rewards.len(),
            1,
            rewards
                .iter()
                .zip(&scale)
                .map(|(r, s)| -r * s / c)
                .collect(),
        ));
        let surrogate = g.dot(col, coef)?;
        total = Some(match total {
            None => surrogate,
            Some(t) => g.add(t, surrogate)?,
        });
        let n = rewards.len() as f64;
        let mean = rewards.iter().sum::<f64>() / n;
        let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        diags.push(ClassDiagnostics {
            class,
            gm_loss: loss,
            reward_mean: mean,
            reward_std: var.sqrt(),
            weight_entropy: entropy(&a),
            rewards,
            weights: a,
        });
    }
    let total = total.ok_or(DistillError::EmptyBatch)?;
    g.backward(total)?;
    gen.params.accumulate_grads(&g, &p);
    Ok(diags)
}
