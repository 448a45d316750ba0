use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Sample, TextError, TokenizerKind, Vocab};
use crate::seeds::rng_from;

const FILLERS: &str = "abcdefghij";
const KEYWORDS: [&str; 2] = ["ABCDEF", "UVWXYZ"];
const PAIR_ALPHABET: &str = "abcdefgh";

/// Synthetic classification tasks whose Bayes-optimal accuracy is 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    /// Two classes; the class decides which keyword set a sentence's one or
    /// two keywords come from. Everything else is shared filler.
    Keyword,
    /// Two sentences; label 1 iff they share a token.
    PairMatch,
    /// Two sentences; label 0/1/2 as the first is shorter/equal/longer.
    PairOrder3,
}

impl FromStr for TaskKind {
    type Err = TextError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "keyword" => Ok(Self::Keyword),
            "pair-match" => Ok(Self::PairMatch),
            "pair-order3" => Ok(Self::PairOrder3),
            other => Err(TextError::UnknownTask(other.to_string())),
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Keyword => "keyword",
            Self::PairMatch => "pair-match",
            Self::PairOrder3 => "pair-order3",
        })
    }
}

impl TaskKind {
    pub fn num_classes(self) -> usize {
        match self {
            Self::Keyword | Self::PairMatch => 2,
            Self::PairOrder3 => 3,
        }
    }

    pub fn is_pair(self) -> bool {
        !matches!(self, Self::Keyword)
    }

    pub fn vocab(self) -> Vocab {
        let content: Vec<String> = match self {
            Self::Keyword => FILLERS
                .chars()
                .chain(KEYWORDS.iter().flat_map(|k| k.chars()))
                .map(String::from)
                .collect(),
            Self::PairMatch | Self::PairOrder3 => PAIR_ALPHABET.chars().map(String::from).collect(),
        };
        Vocab::new(TokenizerKind::Char, content, self.num_classes()).expect("static vocab")
    }
}

/// `n_per_class` samples per class, class-major, bit-reproducible from `seed`.
pub fn make_synthetic_task(
    kind: TaskKind,
    n_per_class: usize,
    seed: u64,
) -> Result<LabeledDataset, TextError> {
    let vocab = Arc::new(kind.vocab());
    let mut rng = rng_from(seed);
    let mut classes = Vec::with_capacity(kind.num_classes());
    for c in 0..kind.num_classes() {
        let bucket = (0..n_per_class)
            .map(|_| match kind {
                TaskKind::Keyword => keyword_sample(&vocab, c, &mut rng),
                TaskKind::PairMatch => pair_match_sample(c, &mut rng),
                TaskKind::PairOrder3 => pair_order_sample(c, &mut rng),
            })
            .collect();
        classes.push(bucket);
    }
    LabeledDataset::from_buckets(vocab, classes)
}

fn keyword_sample(vocab: &Vocab, class: usize, rng: &mut impl Rng) -> Sample {
    let n_fill = FILLERS.len();
    let len = rng.gen_range(6..=12);
    let mut tokens: Vec<usize> = (0..len).map(|_| rng.gen_range(0..n_fill)).collect();
    let n_kw = rng.gen_range(1..=2);
    let mut positions: Vec<usize> = (0..len).collect();
    positions.shuffle(rng);
    let kw_base = n_fill + class * KEYWORDS[0].len();
    for &p in &positions[..n_kw] {
        tokens[p] = kw_base + rng.gen_range(0..KEYWORDS[class].len());
    }
    debug_assert!(tokens.iter().all(|&t| vocab.is_content(t)));
    Sample::single(tokens, class)
}

fn pair_match_sample(label: usize, rng: &mut impl Rng) -> Sample {
    let n = PAIR_ALPHABET.len();
    let len1 = rng.gen_range(2..=4);
    let len2 = rng.gen_range(2..=4);
    let mut alphabet: Vec<usize> = (0..n).collect();
    alphabet.shuffle(rng);
    let first = alphabet[..len1].to_vec();
    let second = if label == 1 {
        let shared = first[rng.gen_range(0..len1)];
        let mut s = vec![shared];
        s.extend(alphabet[len1..len1 + len2 - 1].iter().copied());
        s.shuffle(rng);
        s
    } else {
        alphabet[len1..len1 + len2].to_vec()
    };
    Sample::pair(first, second, label)
}

fn pair_order_sample(label: usize, rng: &mut impl Rng) -> Sample {
    let n = PAIR_ALPHABET.len();
    let (len1, len2) = loop {
        let a = rng.gen_range(1..=5usize);
        let b = rng.gen_range(1..=5usize);
        let l = match a.cmp(&b) {
            std::cmp::Ordering::Less => 0,
            std::cmp::Ordering::Equal => 1,
            std::cmp::Ordering::Greater => 2,
        };
        if l == label {
            break (a, b);
        }
    };
    let first = (0..len1).map(|_| rng.gen_range(0..n)).collect();
    let second = (0..len2).map(|_| rng.gen_range(0..n)).collect();
    Sample::pair(first, second, label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn keyword_is_deterministic_and_balanced() {
        let a = make_synthetic_task(TaskKind::Keyword, 10, 7).unwrap();
        let b = make_synthetic_task(TaskKind::Keyword, 10, 7).unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(a.class(0).len(), 10);
        assert_eq!(a.classes(), b.classes());
        let c = make_synthetic_task(TaskKind::Keyword, 10, 8).unwrap();
        assert_ne!(a.classes(), c.classes());
        assert!(a.vocab().size() <= 30);
    }

    #[test]
    fn keyword_classes_are_separable() {
        let d = make_synthetic_task(TaskKind::Keyword, 200, 1).unwrap();
        for c in 0..2 {
            let lo = FILLERS.len() + c * 6;
            for s in d.class(c) {
                let kws: Vec<_> = s.tokens.iter().filter(|&&t| t >= FILLERS.len()).collect();
                assert!(!kws.is_empty() && kws.len() <= 2);
                assert!(kws.iter().all(|&&t| t >= lo && t < lo + 6));
            }
        }
    }

    #[test]
    fn pair_match_labels_follow_overlap() {
        let d = make_synthetic_task(TaskKind::PairMatch, 100, 3).unwrap();
        for s in d.iter() {
            let a: HashSet<_> = s.first().iter().collect();
            let shares = s.second().unwrap().iter().any(|t| a.contains(t));
            assert_eq!(shares as usize, s.label);
        }
    }

    #[test]
    fn pair_order3_has_three_buckets() {
        let d = make_synthetic_task(TaskKind::PairOrder3, 30, 3).unwrap();
        assert_eq!(d.num_classes(), 3);
        for s in d.iter() {
            let (l1, l2) = (s.first().len(), s.second().unwrap().len());
            assert_eq!(s.label, (l1.cmp(&l2) as i32 + 1) as usize);
        }
    }

    #[test]
    fn unknown_task() {
        assert!(matches!(
            "sst2".parse::<TaskKind>(),
            Err(TextError::UnknownTask(_))
        ));
    }
}
