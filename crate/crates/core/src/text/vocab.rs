use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::TextError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerKind {
    #[default]
    Char,
    Word,
}

/// Token <-> id map.
///
/// Content tokens occupy `0..n_content`; then `<sep>`, `<eos>`, `<pad>` and
/// one `<bos_i>` per class. The generator only ever emits ids below
/// [`Vocab::n_emit`] (content, separator, end).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    kind: TokenizerKind,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    n_content: usize,
    num_classes: usize,
}

impl Vocab {
    pub fn new(
        kind: TokenizerKind,
        content: Vec<String>,
        num_classes: usize,
    ) -> Result<Self, TextError> {
        if num_classes == 0 {
            return Err(TextError::InvalidVocab("need at least one class".into()));
        }
        let n_content = content.len();
        let mut tokens = content;
        tokens.push("<sep>".into());
        tokens.push("<eos>".into());
        tokens.push("<pad>".into());
        tokens.extend((0..num_classes).map(|c| format!("<bos_{c}>")));
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(TextError::InvalidVocab("empty token".into()));
            }
            if kind == TokenizerKind::Char && i < n_content && t.chars().count() != 1 {
                return Err(TextError::InvalidVocab(format!(
                    "char vocab token `{t}` is not a single character"
                )));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(TextError::InvalidVocab(format!("duplicate token `{t}`")));
            }
        }
        Ok(Self {
            kind,
            tokens,
            index,
            n_content,
            num_classes,
        })
    }

    /// Sorted vocabulary of every token appearing in `texts`.
    pub fn from_texts<'a>(
        kind: TokenizerKind,
        texts: impl IntoIterator<Item = &'a str>,
        num_classes: usize,
    ) -> Result<Self, TextError> {
        let mut set = BTreeSet::new();
        for t in texts {
            match kind {
                TokenizerKind::Char => set.extend(t.chars().map(String::from)),
                TokenizerKind::Word => set.extend(t.split_whitespace().map(String::from)),
            }
        }
        Self::new(kind, set.into_iter().collect(), num_classes)
    }

    pub fn kind(&self) -> TokenizerKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn n_content(&self) -> usize {
        self.n_content
    }

    /// Size of the generator's output space: content, `<sep>`, `<eos>`.
    pub fn n_emit(&self) -> usize {
        self.n_content + 2
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn sep_id(&self) -> usize {
        self.n_content
    }

    pub fn eos_id(&self) -> usize {
        self.n_content + 1
    }

    pub fn pad_id(&self) -> usize {
        self.n_content + 2
    }

    pub fn bos_id(&self, class: usize) -> usize {
        debug_assert!(class < self.num_classes);
        self.n_content + 3 + class
    }

    pub fn class_bos_ids(&self) -> Vec<usize> {
        (0..self.num_classes).map(|c| self.bos_id(c)).collect()
    }

    /// Class whose `<bos>` is `id`, if any.
    pub fn class_of_bos(&self, id: usize) -> Option<usize> {
        let lo = self.n_content + 3;
        (id >= lo && id < lo + self.num_classes).then(|| id - lo)
    }

    pub fn is_content(&self, id: usize) -> bool {
        id < self.n_content
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn content_tokens(&self) -> &[String] {
        &self.tokens[..self.n_content]
    }

    pub fn tokenize(&self, text: &str) -> Result<Vec<usize>, TextError> {
        let lookup = |t: &str| match self.index.get(t) {
            Some(&i) if i < self.n_content => Ok(i),
            _ => Err(TextError::UnknownToken(t.to_string())),
        };
        match self.kind {
            TokenizerKind::Char => {
                let mut buf = [0u8; 4];
                text.chars()
                    .map(|c| lookup(c.encode_utf8(&mut buf)))
                    .collect()
            }
            TokenizerKind::Word => text.split_whitespace().map(lookup).collect(),
        }
    }

    /// Content ids back to text. Non-content ids render as their token name.
    pub fn detokenize(&self, ids: &[usize]) -> String {
        let parts = ids.iter().map(|&i| self.token(i).unwrap_or("<unk>"));
        match self.kind {
            TokenizerKind::Char => parts.collect(),
            TokenizerKind::Word => parts.collect::<Vec<_>>().join(" "),
        }
    }
}
