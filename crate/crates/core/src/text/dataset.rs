use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{TextError, Vocab};

/// Content token ids with a class label. For two-sentence samples,
/// `pair_split` is the index in `tokens` where the second sentence starts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sample {
    pub tokens: Vec<usize>,
    pub label: usize,
    pub pair_split: Option<usize>,
}

impl Sample {
    pub fn single(tokens: Vec<usize>, label: usize) -> Self {
        Self {
            tokens,
            label,
            pair_split: None,
        }
    }

    pub fn pair(first: Vec<usize>, second: Vec<usize>, label: usize) -> Self {
        let split = first.len();
        let mut tokens = first;
        tokens.extend(second);
        Self {
            tokens,
            label,
            pair_split: Some(split),
        }
    }

    pub fn first(&self) -> &[usize] {
        &self.tokens[..self.pair_split.unwrap_or(self.tokens.len())]
    }

    pub fn second(&self) -> Option<&[usize]> {
        self.pair_split.map(|s| &self.tokens[s..])
    }

    /// Keeps at most `max_len` content tokens. A pair whose second sentence
    /// is cut away entirely becomes a single sentence.
    pub fn truncate(&mut self, max_len: usize) {
        if self.tokens.len() <= max_len {
            return;
        }
        self.tokens.truncate(max_len);
        if let Some(s) = self.pair_split {
            if s >= self.tokens.len() {
                self.pair_split = None;
            }
        }
    }

    pub fn validate(&self, vocab: &Vocab) -> Result<(), TextError> {
        if self.label >= vocab.num_classes() {
            return Err(TextError::LabelOutOfRange {
                label: self.label,
                classes: vocab.num_classes(),
            });
        }
        if let Some(&t) = self.tokens.iter().find(|&&t| !vocab.is_content(t)) {
            return Err(TextError::NotContent(t));
        }
        if let Some(s) = self.pair_split {
            if s == 0 || s >= self.tokens.len() {
                return Err(TextError::InvalidEncoding(format!(
                    "pair split {s} not inside (0, {})",
                    self.tokens.len()
                )));
            }
        }
        Ok(())
    }
}

/// `<bos_label> sent1 [<sep> sent2] <eos>`.
pub fn encode_for_generator(sample: &Sample, vocab: &Vocab) -> Result<Vec<usize>, TextError> {
    sample.validate(vocab)?;
    let mut out = Vec::with_capacity(sample.tokens.len() + 3);
    out.push(vocab.bos_id(sample.label));
    out.extend_from_slice(sample.first());
    if let Some(second) = sample.second() {
        out.push(vocab.sep_id());
        out.extend_from_slice(second);
    }
    out.push(vocab.eos_id());
    Ok(out)
}

/// Learner input: the generator encoding without the class-revealing `<bos>`.
pub fn encode_for_learner(sample: &Sample, vocab: &Vocab) -> Vec<usize> {
    let mut out = Vec::with_capacity(sample.tokens.len() + 2);
    out.extend_from_slice(sample.first());
    if let Some(second) = sample.second() {
        out.push(vocab.sep_id());
        out.extend_from_slice(second);
    }
    out.push(vocab.eos_id());
    out
}

/// Inverse of [`encode_for_generator`].
pub fn decode_generated(ids: &[usize], vocab: &Vocab) -> Result<Sample, TextError> {
    let (&first, rest) = ids
        .split_first()
        .ok_or_else(|| TextError::InvalidEncoding("empty sequence".into()))?;
    let label = vocab
        .class_of_bos(first)
        .ok_or_else(|| TextError::InvalidEncoding("missing <bos_c>".into()))?;
    let (&last, body) = rest
        .split_last()
        .ok_or_else(|| TextError::InvalidEncoding("missing <eos>".into()))?;
    if last != vocab.eos_id() {
        return Err(TextError::InvalidEncoding("missing <eos>".into()));
    }
    let mut tokens = Vec::with_capacity(body.len());
    let mut split = None;
    for &t in body {
        if t == vocab.sep_id() && split.is_none() {
            split = Some(tokens.len());
        } else if vocab.is_content(t) {
            tokens.push(t);
        } else {
            return Err(TextError::InvalidEncoding(format!("unexpected id {t}")));
        }
    }
    Ok(Sample {
        tokens,
        label,
        pair_split: split,
    })
}

/// Samples bucketed by class. Every bucket is non-empty.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    vocab: Arc<Vocab>,
    classes: Vec<Vec<Sample>>,
}

impl LabeledDataset {
    /// Buckets `samples` by label, preserving input order within a class.
    pub fn new(vocab: Arc<Vocab>, samples: Vec<Sample>) -> Result<Self, TextError> {
        let mut classes = vec![Vec::new(); vocab.num_classes()];
        for s in samples {
            s.validate(&vocab)?;
            classes[s.label].push(s);
        }
        Self::from_buckets(vocab, classes)
    }

    pub fn from_buckets(vocab: Arc<Vocab>, classes: Vec<Vec<Sample>>) -> Result<Self, TextError> {
        if classes.len() != vocab.num_classes() {
            return Err(TextError::InvalidVocab(format!(
                "{} buckets for {} classes",
                classes.len(),
                vocab.num_classes()
            )));
        }
        for (c, bucket) in classes.iter().enumerate() {
            if bucket.is_empty() {
                return Err(TextError::EmptyClass(c));
            }
            for s in bucket {
                if s.label != c {
                    return Err(TextError::LabelOutOfRange {
                        label: s.label,
                        classes: vocab.num_classes(),
                    });
                }
                s.validate(&vocab)?;
            }
        }
        Ok(Self { vocab, classes })
    }

    pub fn vocab(&self) -> &Arc<Vocab> {
        &self.vocab
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class(&self, c: usize) -> &[Sample] {
        &self.classes[c]
    }

    pub fn classes(&self) -> &[Vec<Sample>] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn min_class_size(&self) -> usize {
        self.classes.iter().map(Vec::len).min().unwrap_or(0)
    }

    /// Class-major iteration.
    pub fn iter(&self) -> impl Iterator<Item = &Sample> {
        self.classes.iter().flatten()
    }

    pub fn truncate_all(&mut self, max_len: usize) {
        for s in self.classes.iter_mut().flatten() {
            s.truncate(max_len);
        }
    }

    /// Per-class index lists into this dataset.
    pub fn subset(&self, picks: &[Vec<usize>]) -> Result<Self, TextError> {
        let classes = picks
            .iter()
            .enumerate()
            .map(|(c, idx)| idx.iter().map(|&i| self.classes[c][i].clone()).collect())
            .collect();
        Self::from_buckets(self.vocab.clone(), classes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::TokenizerKind;
    use proptest::prelude::*;

    fn vocab() -> Vocab {
        Vocab::new(TokenizerKind::Char, vec!["a".into(), "b".into()], 2).unwrap()
    }

    #[test]
    fn encode_single_and_pair() {
        let v = vocab();
        let s = Sample::single(vec![0, 1], 1);
        assert_eq!(
            encode_for_generator(&s, &v).unwrap(),
            vec![v.bos_id(1), 0, 1, v.eos_id()]
        );
        let p = Sample::pair(vec![0], vec![1], 0);
        assert_eq!(
            encode_for_generator(&p, &v).unwrap(),
            vec![v.bos_id(0), 0, v.sep_id(), 1, v.eos_id()]
        );
        let e = Sample::single(vec![], 0);
        assert_eq!(
            encode_for_generator(&e, &v).unwrap(),
            vec![v.bos_id(0), v.eos_id()]
        );
    }

    #[test]
    fn encode_rejects_bad_label() {
        let v = vocab();
        assert!(encode_for_generator(&Sample::single(vec![0], 2), &v).is_err());
    }

    #[test]
    fn dataset_buckets() {
        let v = Arc::new(vocab());
        let d = LabeledDataset::new(
            v.clone(),
            vec![Sample::single(vec![0], 1), Sample::single(vec![1], 0)],
        )
        .unwrap();
        assert_eq!(d.class(0)[0].tokens, vec![1]);
        assert_eq!(d.len(), 2);
        let err = LabeledDataset::new(v, vec![Sample::single(vec![0], 1)]).unwrap_err();
        assert!(matches!(err, TextError::EmptyClass(0)));
    }

    #[test]
    fn truncation_drops_empty_second_sentence() {
        let mut p = Sample::pair(vec![0, 0], vec![1], 0);
        p.truncate(2);
        assert_eq!(p.pair_split, None);
        assert_eq!(p.tokens, vec![0, 0]);
    }

    proptest! {
        #[test]
        fn generator_encoding_round_trips(
            first in proptest::collection::vec(0usize..2, 0..8),
            second in proptest::collection::vec(0usize..2, 1..8),
            pair in any::<bool>(),
            label in 0usize..2,
        ) {
            let v = vocab();
            let s = if pair && !first.is_empty() {
                Sample::pair(first, second, label)
            } else {
                Sample::single(first, label)
            };
            let enc = encode_for_generator(&s, &v).unwrap();
            prop_assert_eq!(decode_generated(&enc, &v).unwrap(), s);
        }
    }
}
