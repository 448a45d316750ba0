use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::{fan_in, uniform};
use super::sampling::{nucleus, sample_index};
use super::ModelError;
use crate::autodiff::{sigmoid, Graph, ParamSet, Tensor, Var};
use crate::seeds::rng_from;
use crate::text::{decode_generated, encode_for_generator, Sample, Vocab};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub embed: usize,
    pub hidden: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            embed: 16,
            hidden: 32,
        }
    }
}

// Parameter slots, in insertion order.
const EMB: usize = 0;
const WZ: usize = 1;
const UZ: usize = 2;
const BZ: usize = 3;
const WR: usize = 4;
const UR: usize = 5;
const BR: usize = 6;
const WN: usize = 7;
const UN: usize = 8;
const BN: usize = 9;
const WO: usize = 10;
const BO: usize = 11;
const NAMES: [&str; 12] = [
    "gen.emb", "gen.wz", "gen.uz", "gen.bz", "gen.wr", "gen.ur", "gen.br", "gen.wn", "gen.un",
    "gen.bn", "gen.wo", "gen.bo",
];

/// One generated sample with the log-probability of its canonical encoding.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub sample: Sample,
    pub encoded: Vec<usize>,
    pub log_prob: f64,
}

/// Single-layer GRU language model over the full vocabulary as input and
/// content + `<sep>` + `<eos>` as output. The only class input is the
/// leading `<bos_c>` token.
#[derive(Clone, Debug)]
pub struct GeneratorModel {
    pub config: GeneratorConfig,
    pub params: ParamSet,
    vocab: Arc<Vocab>,
}

/// Per-row GRU state for the graph-free inference path.
#[derive(Clone, Debug)]
pub struct GruState {
    h: Vec<f64>,
}

impl GeneratorModel {
    pub fn new(config: GeneratorConfig, vocab: Arc<Vocab>, seed: u64) -> Self {
        let mut rng = rng_from(seed);
        let (e, h, v, o) = (config.embed, config.hidden, vocab.size(), vocab.n_emit());
        let mut params = ParamSet::new();
        params.insert(NAMES[EMB], uniform(&[v, e], 1.0, &mut rng));
        for gate in 0..3 {
            params.insert(NAMES[1 + 3 * gate], fan_in(e, h, &mut rng));
            params.insert(NAMES[2 + 3 * gate], fan_in(h, h, &mut rng));
            params.insert(NAMES[3 + 3 * gate], Tensor::zeros(&[h]));
        }
        params.insert(NAMES[WO], fan_in(h, o, &mut rng));
        params.insert(NAMES[BO], Tensor::zeros(&[o]));
        Self {
            config,
            params,
            vocab,
        }
    }

    /// Wraps loaded parameters, checking names and shapes against the layout
    /// `config` and `vocab` imply.
    pub fn from_params(
        config: GeneratorConfig,
        vocab: Arc<Vocab>,
        params: ParamSet,
    ) -> Result<Self, ModelError> {
        let reference = Self::new(config.clone(), vocab.clone(), 0);
        check_layout(&reference.params, &params)?;
        Ok(Self {
            config,
            params,
            vocab,
        })
    }

    pub fn vocab(&self) -> &Arc<Vocab> {
        &self.vocab
    }

    /// Log-probabilities of every sequence in `seqs` as a `B x 1` column.
    /// Each sequence is a full generator encoding; every position after the
    /// first is predicted.
    pub fn sequence_log_probs(
        &self,
        g: &mut Graph,
        p: &[Var],
        seqs: &[Vec<usize>],
    ) -> Result<Var, ModelError> {
        if seqs.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        if let Some(s) = seqs.iter().find(|s| s.len() < 2) {
            return Err(ModelError::SequenceTooShort(s.len()));
        }
        let b = seqs.len();
        let hdim = self.config.hidden;
        let max_len = seqs.iter().map(Vec::len).max().unwrap();
        let pad = self.vocab.pad_id();
        let mut h = g.constant(Tensor::matrix(b, hdim, vec![0.0; b * hdim]));
        let mut total: Option<Var> = None;
        for t in 0..max_len - 1 {
            let inputs: Vec<usize> = seqs.iter().map(|s| *s.get(t).unwrap_or(&pad)).collect();
            let targets: Vec<Option<usize>> = seqs.iter().map(|s| s.get(t + 1).copied()).collect();
            let x = g.gather_rows(p[EMB], &inputs)?;
            h = gru_cell(g, p, x, h)?;
            let logits = g.matmul(h, p[WO])?;
            let logits = g.add_row(logits, p[BO])?;
            let ls = g.log_softmax(logits);
            let picked = g.pick(ls, &targets)?;
            total = Some(match total {
                None => picked,
                Some(acc) => g.add(acc, picked)?,
            });
        }
        Ok(total.expect("at least one step"))
    }

    /// `log p(x)`: sum of next-token log-probabilities over predicted
    /// positions (no length normalization).
    pub fn sequence_log_prob(
        &self,
        g: &mut Graph,
        p: &[Var],
        encoded: &[usize],
    ) -> Result<Var, ModelError> {
        let col = self.sequence_log_probs(g, p, &[encoded.to_vec()])?;
        Ok(g.sum(col))
    }

    /// Mean next-token negative log-likelihood of one sequence.
    pub fn lm_loss(&self, g: &mut Graph, p: &[Var], encoded: &[usize]) -> Result<Var, ModelError> {
        self.lm_loss_batch(g, p, &[encoded.to_vec()])
    }

    /// Batch mean of the per-sequence mean token loss.
    pub fn lm_loss_batch(
        &self,
        g: &mut Graph,
        p: &[Var],
        seqs: &[Vec<usize>],
    ) -> Result<Var, ModelError> {
        let col = self.sequence_log_probs(g, p, seqs)?;
        let b = seqs.len() as f64;
        let w = Tensor::matrix(
            seqs.len(),
            1,
            seqs.iter()
                .map(|s| -1.0 / (b * (s.len() - 1) as f64))
                .collect(),
        );
        let w = g.constant(w);
        Ok(g.dot(col, w)?)
    }

    pub fn init_state(&self) -> GruState {
        GruState {
            h: vec![0.0; self.config.hidden],
        }
    }

    /// Feeds `token` and returns next-token log-probabilities over the
    /// emittable ids `0..n_emit`.
    pub fn step(&self, state: &mut GruState, token: usize) -> Vec<f64> {
        let (e, hd) = (self.config.embed, self.config.hidden);
        let emb = self.params.value(EMB).data();
        let x = &emb[token * e..(token + 1) * e];
        let h = &state.h;
        let gate = |w: usize, u: usize, b: usize, hin: &[f64]| -> Vec<f64> {
            let wv = self.params.value(w).data();
            let uv = self.params.value(u).data();
            let bv = self.params.value(b).data();
            (0..hd)
                .map(|j| {
                    let mut s = bv[j];
                    for (k, xk) in x.iter().enumerate() {
                        s += xk * wv[k * hd + j];
                    }
                    for (k, hk) in hin.iter().enumerate() {
                        s += hk * uv[k * hd + j];
                    }
                    s
                })
                .collect()
        };
        let z: Vec<f64> = gate(WZ, UZ, BZ, h).into_iter().map(sigmoid).collect();
        let r: Vec<f64> = gate(WR, UR, BR, h).into_iter().map(sigmoid).collect();
        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
        let n: Vec<f64> = gate(WN, UN, BN, &rh).into_iter().map(f64::tanh).collect();
        let new_h: Vec<f64> = (0..hd).map(|j| n[j] + z[j] * (h[j] - n[j])).collect();
        state.h = new_h;
        let o = self.vocab.n_emit();
        let wo = self.params.value(WO).data();
        let bo = self.params.value(BO).data();
        let logits: Vec<f64> = (0..o)
            .map(|j| {
                bo[j]
                    + state
                        .h
                        .iter()
                        .enumerate()
                        .map(|(k, hk)| hk * wo[k * o + j])
                        .sum::<f64>()
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        logits.into_iter().map(|l| l - lse).collect()
    }

    /// Graph-free `log p(x)`; agrees with [`GeneratorModel::sequence_log_prob`].
    pub fn score(&self, encoded: &[usize]) -> Result<f64, ModelError> {
        if encoded.len() < 2 {
            return Err(ModelError::SequenceTooShort(encoded.len()));
        }
        let mut state = self.init_state();
        let mut total = 0.0;
        for w in encoded.windows(2) {
            let lp = self.step(&mut state, w[0]);
            total += lp[w[1]];
        }
        Ok(total)
    }

    /// Autoregressive nucleus sampling from `<bos_class>` until `<eos>` or
    /// `max_len` content tokens. Separators that would leave an empty
    /// sentence, and any separator after the first, are dropped; the
    /// returned log-probability is that of the resulting encoding.
    pub fn sample(
        &self,
        class: usize,
        top_p: f64,
        max_len: usize,
        rng: &mut impl Rng,
    ) -> Result<Generated, ModelError> {
        let vocab = &self.vocab;
        let mut state = self.init_state();
        let mut token = vocab.bos_id(class);
        let mut body = Vec::new();
        let mut content = 0;
        while content < max_len {
            let lp = self.step(&mut state, token);
            let probs: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
            token = sample_index(&nucleus(&probs, top_p), rng);
            if token == vocab.eos_id() {
                break;
            }
            if vocab.is_content(token) {
                content += 1;
            }
            body.push(token);
        }
        let sample = canonical_sample(&body, class, vocab);
        let encoded = encode_for_generator(&sample, vocab)?;
        let log_prob = self.score(&encoded)?;
        Ok(Generated {
            sample,
            encoded,
            log_prob,
        })
    }

    /// Next-token distribution after `prefix` (for inspection and tests).
    pub fn next_token_probs(&self, prefix: &[usize]) -> Vec<f64> {
        let mut state = self.init_state();
        let mut lp = Vec::new();
        for &t in prefix {
            lp = self.step(&mut state, t);
        }
        lp.into_iter().map(f64::exp).collect()
    }

    pub fn decode(&self, encoded: &[usize]) -> Result<Sample, ModelError> {
        Ok(decode_generated(encoded, &self.vocab)?)
    }
}

fn canonical_sample(body: &[usize], class: usize, vocab: &Vocab) -> Sample {
    let mut tokens = Vec::with_capacity(body.len());
    let mut split = None;
    let content_total = body.iter().filter(|&&t| vocab.is_content(t)).count();
    for &t in body {
        if t == vocab.sep_id() {
            if split.is_none() && !tokens.is_empty() && tokens.len() < content_total {
                split = Some(tokens.len());
            }
        } else {
            tokens.push(t);
        }
    }
    Sample {
        tokens,
        label: class,
        pair_split: split,
    }
}

fn gru_cell(g: &mut Graph, p: &[Var], x: Var, h: Var) -> Result<Var, ModelError> {
    let pre = |g: &mut Graph, w: usize, u: usize, b: usize, hin: Var| -> Result<Var, ModelError> {
        let xw = g.matmul(x, p[w])?;
        let hu = g.matmul(hin, p[u])?;
        let s = g.add(xw, hu)?;
        Ok(g.add_row(s, p[b])?)
    };
    let z = pre(g, WZ, UZ, BZ, h)?;
    let z = g.sigmoid(z);
    let r = pre(g, WR, UR, BR, h)?;
    let r = g.sigmoid(r);
    let rh = g.mul(r, h)?;
    let n = pre(g, WN, UN, BN, rh)?;
    let n = g.tanh(n);
    let d = g.sub(h, n)?;
    let zd = g.mul(z, d)?;
    Ok(g.add(n, zd)?)
}

pub(crate) fn check_layout(reference: &ParamSet, loaded: &ParamSet) -> Result<(), ModelError> {
    if reference.len() != loaded.len() {
        return Err(ModelError::LayoutMismatch(format!(
            "{} tensors, expected {}",
            loaded.len(),
            reference.len()
        )));
    }
    for ((rn, rt), (ln, lt)) in reference.iter().zip(loaded.iter()) {
        if rn != ln || rt.shape() != lt.shape() {
            return Err(ModelError::LayoutMismatch(format!(
                "`{ln}` {:?}, expected `{rn}` {:?}",
                lt.shape(),
                rt.shape()
            )));
        }
    }
    Ok(())
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

    fn model() -> GeneratorModel {
        GeneratorModel::new(
            GeneratorConfig {
                embed: 4,
                hidden: 5,
            },
            vocab(),
            11,
        )
    }

    #[test]
    fn graph_and_inference_paths_agree() {
        let m = model();
        let v = m.vocab().clone();
        let seqs = vec![
            vec![v.bos_id(0), 0, 1, v.eos_id()],
            vec![v.bos_id(1), 2, v.sep_id(), 0, 0, 1, v.eos_id()],
        ];
        let mut g = Graph::new();
        let p = m.params.bind(&mut g);
        let col = m.sequence_log_probs(&mut g, &p, &seqs).unwrap();
        for (i, s) in seqs.iter().enumerate() {
            let direct = m.score(s).unwrap();
            assert!((g.value(col).data()[i] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_output_layer_is_uniform() {
        let mut m = model();
        m.params.value_mut(WO).fill(0.0);
        let v = m.vocab().clone();
        let seq = vec![v.bos_id(0), 0, 1, 2, v.eos_id()];
        let mut g = Graph::new();
        let p = m.params.bind(&mut g);
        let loss = m.lm_loss(&mut g, &p, &seq).unwrap();
        assert!((g.value(loss).item() - (v.n_emit() as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn log_prob_is_minus_count_times_loss() {
        let m = model();
        let v = m.vocab().clone();
        let seq = vec![v.bos_id(1), 0, 2, 2, v.eos_id()];
        let mut g = Graph::new();
        let p = m.params.bind(&mut g);
        let lp = m.sequence_log_prob(&mut g, &p, &seq).unwrap();
        let loss = m.lm_loss(&mut g, &p, &seq).unwrap();
        let n = (seq.len() - 1) as f64;
        assert!((g.value(lp).item() + n * g.value(loss).item()).abs() < 1e-12);
        // duplicated batch leaves the mean loss unchanged
        let loss2 = m
            .lm_loss_batch(&mut g, &p, &[seq.clone(), seq.clone()])
            .unwrap();
        assert!((g.value(loss2).item() - g.value(loss).item()).abs() < 1e-12);
    }

    #[test]
    fn short_sequence_rejected() {
        let m = model();
        let mut g = Graph::new();
        let p = m.params.bind(&mut g);
        assert!(matches!(
            m.lm_loss(&mut g, &p, &[m.vocab().bos_id(0)]),
            Err(ModelError::SequenceTooShort(1))
        ));
    }

    #[test]
    fn next_token_distribution_normalized() {
        let m = model();
        let v = m.vocab().clone();
        let p = m.next_token_probs(&[v.bos_id(0), 1, 2]);
        assert_eq!(p.len(), v.n_emit());
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn samples_are_canonical_and_scored() {
        let m = model();
        let mut rng = rng_from(3);
        for c in 0..2 {
            for _ in 0..50 {
                let s = m.sample(c, 0.95, 8, &mut rng).unwrap();
                assert_eq!(s.sample.label, c);
                assert!(s.sample.tokens.len() <= 8);
                s.sample.validate(m.vocab()).unwrap();
                assert!(s.log_prob.is_finite());
                assert_eq!(m.decode(&s.encoded).unwrap(), s.sample);
            }
        }
    }

    #[test]
    fn canonicalization_drops_edge_separators() {
        let v = vocab();
        let sep = v.sep_id();
        let s = canonical_sample(&[sep, 0, sep, 1, sep], 0, &v);
        assert_eq!(s.tokens, vec![0, 1]);
        assert_eq!(s.pair_split, Some(1));
        let s = canonical_sample(&[0, 1, sep], 1, &v);
        assert_eq!(s.pair_split, None);
    }

    #[test]
    fn reinit_is_bit_exact() {
        let a = model();
        let b = model();
        assert_eq!(a.params, b.params);
    }
}
