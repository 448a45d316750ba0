use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::generator::check_layout;
use super::init::{fan_in, uniform};
use super::ModelError;
use crate::autodiff::{Graph, Optimizer, ParamSet, StepStats, Tensor, Var};
use crate::seeds::rng_from;
use crate::text::{encode_for_learner, Sample, Vocab};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Arch {
    /// Mean-pooled embeddings through one tanh layer.
    #[default]
    #[serde(rename = "arch-a")]
    A,
    /// Elman recurrence, hidden states mean-pooled over positions.
    #[serde(rename = "arch-b")]
    B,
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Arch::A => "arch-a",
            Arch::B => "arch-b",
        })
    }
}

impl std::str::FromStr for Arch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "arch-a" | "a" => Ok(Arch::A),
            "arch-b" | "b" => Ok(Arch::B),
            _ => Err(format!("unknown learner architecture `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub arch: Arch,
    pub embed: usize,
    pub hidden: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            arch: Arch::A,
            embed: 16,
            hidden: 16,
        }
    }
}

/// Gradient over the classification head only: `W` (C x hidden) row-major,
/// then `b` (C).
#[derive(Clone, Debug, PartialEq)]
pub struct FlatGradient(pub Vec<f64>);

impl FlatGradient {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: f64, other: &FlatGradient) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += c * b;
        }
    }
}

const EMB: usize = 0;

/// The classifier. Parameter order: embedding, encoder tensors, head `W`,
/// head `b`; the head is always last.
#[derive(Clone, Debug)]
pub struct LearnerModel {
    pub config: LearnerConfig,
    pub params: ParamSet,
    vocab: Arc<Vocab>,
    num_classes: usize,
}

impl LearnerModel {
    /// Fresh initialization, bit-reproducible from `seed`.
    pub fn new(config: LearnerConfig, vocab: Arc<Vocab>, seed: u64) -> Self {
        let mut rng = rng_from(seed);
        let (e, h, c) = (config.embed, config.hidden, vocab.num_classes());
        let mut params = ParamSet::new();
        params.insert("learner.emb", uniform(&[vocab.size(), e], 1.0, &mut rng));
        match config.arch {
            Arch::A => {
                params.insert("learner.w1", fan_in(e, h, &mut rng));
                params.insert("learner.b1", Tensor::zeros(&[h]));
            }
            Arch::B => {
                params.insert("learner.wx", fan_in(e, h, &mut rng));
                params.insert("learner.wh", fan_in(h, h, &mut rng));
                params.insert("learner.bh", Tensor::zeros(&[h]));
            }
        }
        params.insert(
            "learner.head_w",
            uniform(&[c, h], 1.0 / (h as f64).sqrt(), &mut rng),
        );
        params.insert("learner.head_b", Tensor::zeros(&[c]));
        Self {
            config,
            params,
            num_classes: c,
            vocab,
        }
    }

    pub fn from_params(
        config: LearnerConfig,
        vocab: Arc<Vocab>,
        params: ParamSet,
    ) -> Result<Self, ModelError> {
        let reference = Self::new(config.clone(), vocab.clone(), 0);
        check_layout(&reference.params, &params)?;
        Ok(Self {
            config,
            params,
            num_classes: vocab.num_classes(),
            vocab,
        })
    }

    pub fn vocab(&self) -> &Arc<Vocab> {
        &self.vocab
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn hidden(&self) -> usize {
        self.config.hidden
    }

    /// `C * hidden + C`.
    pub fn head_len(&self) -> usize {
        self.num_classes * self.config.hidden + self.num_classes
    }

    fn head_w(&self) -> usize {
        self.params.len() - 2
    }

    fn head_b(&self) -> usize {
        self.params.len() - 1
    }

    /// Encoder output (the head's input) for a batch, `B x hidden`.
    pub fn features_graph(
        &self,
        g: &mut Graph,
        p: &[Var],
        samples: &[Sample],
    ) -> Result<Var, ModelError> {
        if samples.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let seqs: Vec<Vec<usize>> = samples
            .iter()
            .map(|s| encode_for_learner(s, &self.vocab))
            .collect();
        match self.config.arch {
            Arch::A => {
                let mut flat = Vec::new();
                let mut segs = Vec::with_capacity(seqs.len());
                for s in &seqs {
                    segs.push((flat.len(), flat.len() + s.len()));
                    flat.extend_from_slice(s);
                }
                let x = g.gather_rows(p[EMB], &flat)?;
                let pooled = g.segment_mean(x, &segs)?;
                let pre = g.matmul(pooled, p[1])?;
                let pre = g.add_row(pre, p[2])?;
                Ok(g.tanh(pre))
            }
            Arch::B => {
                let b = seqs.len();
                let hd = self.config.hidden;
                let max_len = seqs.iter().map(Vec::len).max().unwrap();
                let pad = self.vocab.pad_id();
                let mut h = g.constant(Tensor::matrix(b, hd, vec![0.0; b * hd]));
                let mut total: Option<Var> = None;
                for t in 0..max_len {
                    let ids: Vec<usize> = seqs.iter().map(|s| *s.get(t).unwrap_or(&pad)).collect();
                    let x = g.gather_rows(p[EMB], &ids)?;
                    let xw = g.matmul(x, p[1])?;
                    let hw = g.matmul(h, p[2])?;
                    let pre = g.add(xw, hw)?;
                    let pre = g.add_row(pre, p[3])?;
                    let cand = g.tanh(pre);
                    // finished rows keep their state and stop contributing
                    let (next, contrib) = if seqs.iter().all(|s| t < s.len()) {
                        (cand, cand)
                    } else {
                        let mask: Vec<f64> = seqs
                            .iter()
                            .flat_map(|s| {
                                std::iter::repeat_n(if t < s.len() { 1.0 } else { 0.0 }, hd)
                            })
                            .collect();
                        let m = g.constant(Tensor::matrix(b, hd, mask));
                        let d = g.sub(cand, h)?;
                        let md = g.mul(m, d)?;
                        (g.add(h, md)?, g.mul(m, cand)?)
                    };
                    h = next;
                    total = Some(match total {
                        None => contrib,
                        Some(acc) => g.add(acc, contrib)?,
                    });
                }
                let inv: Vec<f64> = seqs
                    .iter()
                    .flat_map(|s| std::iter::repeat_n(1.0 / s.len() as f64, hd))
                    .collect();
                let inv = g.constant(Tensor::matrix(b, hd, inv));
                Ok(g.mul(total.expect("non-empty sequence"), inv)?)
            }
        }
    }

    /// Class logits, `B x C`.
    pub fn logits_graph(
        &self,
        g: &mut Graph,
        p: &[Var],
        samples: &[Sample],
    ) -> Result<Var, ModelError> {
        let f = self.features_graph(g, p, samples)?;
        let wt = g.transpose(p[self.head_w()])?;
        let z = g.matmul(f, wt)?;
        Ok(g.add_row(z, p[self.head_b()])?)
    }

    /// Cross-entropy of one sample.
    pub fn learner_loss(
        &self,
        g: &mut Graph,
        p: &[Var],
        sample: &Sample,
    ) -> Result<Var, ModelError> {
        self.batch_loss(g, p, std::slice::from_ref(sample), &[1.0])
    }

    /// `sum_i w_i * CE(x_i)`.
    pub fn batch_loss(
        &self,
        g: &mut Graph,
        p: &[Var],
        samples: &[Sample],
        weights: &[f64],
    ) -> Result<Var, ModelError> {
        let z = self.logits_graph(g, p, samples)?;
        let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
        Ok(g.weighted_cross_entropy(z, &labels, weights)?)
    }

    /// One optimizer step on the mean cross-entropy of `samples`.
    pub fn fit_batch(
        &mut self,
        samples: &[Sample],
        opt: &mut Optimizer,
    ) -> Result<(f64, StepStats), ModelError> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g);
        let w = vec![1.0 / samples.len() as f64; samples.len()];
        let loss = self.batch_loss(&mut g, &p, samples, &w)?;
        g.backward(loss)?;
        self.params.accumulate_grads(&g, &p);
        let value = g.value(loss).item();
        let stats = opt.step(&mut self.params)?;
        Ok((value, stats))
    }

    /// Graph-free encoder output.
    pub fn features(&self, sample: &Sample) -> Vec<f64> {
        let seq = encode_for_learner(sample, &self.vocab);
        let (e, hd) = (self.config.embed, self.config.hidden);
        let emb = self.params.value(EMB).data();
        match self.config.arch {
            Arch::A => {
                let mut pooled = vec![0.0; e];
                for &t in &seq {
                    for (p, x) in pooled.iter_mut().zip(&emb[t * e..(t + 1) * e]) {
                        *p += x;
                    }
                }
                let inv = 1.0 / seq.len() as f64;
                pooled.iter_mut().for_each(|p| *p *= inv);
                let w1 = self.params.value(1).data();
                let b1 = self.params.value(2).data();
                (0..hd)
                    .map(|j| {
                        let mut s = 0.0;
                        for (k, pk) in pooled.iter().enumerate() {
                            s += pk * w1[k * hd + j];
                        }
                        (s + b1[j]).tanh()
                    })
                    .collect()
            }
            Arch::B => {
                let wx = self.params.value(1).data();
                let wh = self.params.value(2).data();
                let bh = self.params.value(3).data();
                let mut h = vec![0.0; hd];
                let mut pooled = vec![0.0; hd];
                for &t in &seq {
                    let x = &emb[t * e..(t + 1) * e];
                    h = (0..hd)
                        .map(|j| {
                            let mut a = 0.0;
                            for (k, xk) in x.iter().enumerate() {
                                a += xk * wx[k * hd + j];
                            }
                            let mut b = 0.0;
                            for (k, hk) in h.iter().enumerate() {
                                b += hk * wh[k * hd + j];
                            }
                            (a + b + bh[j]).tanh()
                        })
                        .collect();
                    pooled.iter_mut().zip(&h).for_each(|(p, x)| *p += x);
                }
                let inv = 1.0 / seq.len() as f64;
                pooled.iter_mut().for_each(|p| *p *= inv);
                pooled
            }
        }
    }

    pub fn features_batch(&self, samples: &[Sample]) -> Vec<Vec<f64>> {
        samples.iter().map(|s| self.features(s)).collect()
    }

    pub fn logits_from_features(&self, f: &[f64]) -> Vec<f64> {
        let w = self.params.value(self.head_w()).data();
        let b = self.params.value(self.head_b()).data();
        let hd = self.config.hidden;
        (0..self.num_classes)
            .map(|c| {
                b[c] + f
                    .iter()
                    .zip(&w[c * hd..(c + 1) * hd])
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
            })
            .collect()
    }

    /// Argmax class, lowest index on ties.
    pub fn predict(&self, sample: &Sample) -> usize {
        let z = self.logits_from_features(&self.features(sample));
        let mut best = 0;
        for (c, v) in z.iter().enumerate() {
            if *v > z[best] {
                best = c;
            }
        }
        best
    }

    /// `grad_{W,b} sum_i w_i * CE(x_i)` with precomputed head inputs.
    pub fn head_gradient_from_features(
        &self,
        features: &[Vec<f64>],
        labels: &[usize],
        weights: &[f64],
    ) -> Result<FlatGradient, ModelError> {
        if features.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let hd = self.config.hidden;
        let mut g = Graph::new();
        let f = g.constant(Tensor::matrix(
            features.len(),
            hd,
            features.iter().flatten().copied().collect(),
        ));
        let w = g.leaf(self.params.value(self.head_w()).clone());
        let b = g.leaf(self.params.value(self.head_b()).clone());
        let wt = g.transpose(w)?;
        let z = g.matmul(f, wt)?;
        let z = g.add_row(z, b)?;
        let loss = g.weighted_cross_entropy(z, labels, weights)?;
        g.backward(loss)?;
        let mut flat = g.grad(w).data().to_vec();
        flat.extend_from_slice(g.grad(b).data());
        Ok(FlatGradient(flat))
    }

    /// `grad_{W,b} sum_i w_i * CE(x_i)`; only the head receives gradient.
    pub fn head_gradient(
        &self,
        samples: &[Sample],
        weights: &[f64],
    ) -> Result<FlatGradient, ModelError> {
        if samples.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let feats = self.features_batch(samples);
        let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
        self.head_gradient_from_features(&feats, &labels, weights)
    }

    /// Unweighted gradient of each sample's own loss.
    pub fn per_sample_head_gradients(
        &self,
        samples: &[Sample],
    ) -> Result<Vec<FlatGradient>, ModelError> {
        samples
            .iter()
            .map(|s| self.head_gradient_from_features(&[self.features(s)], &[s.label], &[1.0]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::TokenizerKind;

    fn vocab() -> Arc<Vocab> {
        Arc::new(
            Vocab::new(
                TokenizerKind::Char,
                vec!["a".into(), "b".into(), "c".into()],
                2,
            )
            .unwrap(),
        )
    }

    fn batch() -> Vec<Sample> {
        vec![
            Sample::single(vec![0, 1, 2], 0),
            Sample::pair(vec![2], vec![1, 1, 0, 0], 1),
            Sample::single(vec![], 1),
        ]
    }

    #[test]
    fn graph_and_inference_features_agree() {
        for arch in [Arch::A, Arch::B] {
            let m = LearnerModel::new(
                LearnerConfig {
                    arch,
                    embed: 4,
                    hidden: 6,
                },
                vocab(),
                5,
            );
            let mut g = Graph::new();
            let p = m.params.bind(&mut g);
            let f = m.features_graph(&mut g, &p, &batch()).unwrap();
            let direct = m.features_batch(&batch());
            for (r, row) in direct.iter().enumerate() {
                assert_eq!(row.len(), m.hidden());
                for (a, b) in row.iter().zip(g.value(f).row(r)) {
                    assert!((a - b).abs() < 1e-12, "{arch}");
                }
            }
        }
    }

    #[test]
    fn uniform_logits_give_ln2() {
        let mut m = LearnerModel::new(LearnerConfig::default(), vocab(), 1);
        let hw = m.head_w();
        m.params.value_mut(hw).fill(0.0);
        let mut g = Graph::new();
        let p = m.params.bind(&mut g);
        let l = m.learner_loss(&mut g, &p, &batch()[0]).unwrap();
        assert!((g.value(l).item() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn head_gradient_linearity_and_zero_weights() {
        let m = LearnerModel::new(LearnerConfig::default(), vocab(), 2);
        let b = batch();
        let zero = m.head_gradient(&b, &[0.0, 0.0, 0.0]).unwrap();
        assert!(zero.0.iter().all(|&x| x == 0.0));
        assert_eq!(zero.len(), m.head_len());
        let w = [0.3, -1.2, 2.0];
        let joint = m.head_gradient(&b, &w).unwrap();
        let per = m.per_sample_head_gradients(&b).unwrap();
        let mut sum = FlatGradient::zeros(m.head_len());
        for (wi, gi) in w.iter().zip(&per) {
            sum.add_scaled(*wi, gi);
        }
        for (a, c) in joint.0.iter().zip(&sum.0) {
            assert!((a - c).abs() < 1e-12);
        }
        assert!(matches!(
            m.head_gradient(&[], &[]),
            Err(ModelError::EmptyBatch)
        ));
    }

    #[test]
    fn arch_b_is_order_sensitive() {
        let v = vocab();
        let x = Sample::single(vec![0, 1, 2, 2], 0);
        let y = Sample::single(vec![2, 2, 1, 0], 0);
        let a = LearnerModel::new(LearnerConfig::default(), v.clone(), 3);
        let fa: Vec<f64> = a
            .features(&x)
            .iter()
            .zip(a.features(&y))
            .map(|(p, q)| p - q)
            .collect();
        assert!(fa.iter().all(|d| d.abs() < 1e-12));
        let b = LearnerModel::new(
            LearnerConfig {
                arch: Arch::B,
                ..Default::default()
            },
            v,
            3,
        );
        let fb: Vec<f64> = b
            .features(&x)
            .iter()
            .zip(b.features(&y))
            .map(|(p, q)| p - q)
            .collect();
        assert!(fb.iter().any(|d| d.abs() > 1e-6));
    }

    #[test]
    fn fit_batch_reduces_loss() {
        let mut m = LearnerModel::new(LearnerConfig::default(), vocab(), 9);
        let mut opt = Optimizer::sgd(0.5);
        let b = batch();
        let (first, _) = m.fit_batch(&b, &mut opt).unwrap();
        let mut last = first;
        for _ in 0..50 {
            last = m.fit_batch(&b, &mut opt).unwrap().0;
        }
        assert!(last < first);
    }
}
