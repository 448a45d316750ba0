use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Sample, TextError, TokenizerKind, Vocab};

/// One line of the JSONL interchange format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JsonlRecord {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text2: Option<String>,
    pub label: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub synthetic: bool,
}

/// How to interpret an input file.
#[derive(Clone, Debug, Default)]
pub struct LoadSchema {
    pub tokenizer: TokenizerKind,
    /// Declared class count; inferred as `max(label) + 1` when absent.
    pub num_classes: Option<usize>,
    /// Reuse an existing vocabulary (e.g. the train split's) instead of
    /// building one from the file.
    pub vocab: Option<Arc<Vocab>>,
    pub max_len: Option<usize>,
}

struct RawRow {
    line: usize,
    text: String,
    text2: Option<String>,
    label: usize,
}

fn build(rows: Vec<RawRow>, schema: &LoadSchema) -> Result<LabeledDataset, TextError> {
    let classes = match (schema.num_classes, &schema.vocab) {
        (Some(c), _) => c,
        (None, Some(v)) => v.num_classes(),
        (None, None) => rows.iter().map(|r| r.label + 1).max().unwrap_or(0),
    };
    if let Some(r) = rows.iter().find(|r| r.label >= classes) {
        return Err(TextError::Malformed {
            line: r.line,
            msg: TextError::LabelOutOfRange {
                label: r.label,
                classes,
            }
            .to_string(),
        });
    }
    let vocab = match &schema.vocab {
        Some(v) => v.clone(),
        None => Arc::new(Vocab::from_texts(
            schema.tokenizer,
            rows.iter()
                .flat_map(|r| std::iter::once(r.text.as_str()).chain(r.text2.as_deref())),
            classes,
        )?),
    };
    let mut samples = Vec::with_capacity(rows.len());
    for r in rows {
        let at = |e: TextError| TextError::Malformed {
            line: r.line,
            msg: e.to_string(),
        };
        let first = vocab.tokenize(&r.text).map_err(at)?;
        let mut s = match &r.text2 {
            Some(t2) => {
                let second = vocab.tokenize(t2).map_err(at)?;
                if first.is_empty() || second.is_empty() {
                    return Err(TextError::Malformed {
                        line: r.line,
                        msg: "both sentences of a pair must be non-empty".into(),
                    });
                }
                Sample::pair(first, second, r.label)
            }
            None => Sample::single(first, r.label),
        };
        if let Some(m) = schema.max_len {
            s.truncate(m);
        }
        samples.push(s);
    }
    LabeledDataset::new(vocab, samples)
}

/// Parses JSONL content. Lines that carry a `provenance` object and no
/// `text` field are headers and are skipped.
pub fn read_jsonl_str(content: &str, schema: &LoadSchema) -> Result<LabeledDataset, TextError> {
    let mut rows = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| TextError::Malformed {
                line: line_no,
                msg: e.to_string(),
            })?;
        if value.get("provenance").is_some() && value.get("text").is_none() {
            continue;
        }
        let rec: JsonlRecord = serde_json::from_value(value).map_err(|e| TextError::Malformed {
            line: line_no,
            msg: e.to_string(),
        })?;
        rows.push(RawRow {
            line: line_no,
            text: rec.text,
            text2: rec.text2,
            label: rec.label,
        });
    }
    build(rows, schema)
}

pub fn load_jsonl(path: &Path, schema: &LoadSchema) -> Result<LabeledDataset, TextError> {
    read_jsonl_str(&std::fs::read_to_string(path)?, schema)
}

/// Two-column (`text<TAB>label`) or three-column (`text<TAB>text2<TAB>label`)
/// TSV. A first line whose label column is not an integer is a header.
pub fn load_tsv(path: &Path, schema: &LoadSchema) -> Result<LabeledDataset, TextError> {
    let content = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let (text, text2, label) = match cols.as_slice() {
            [t, l] => (*t, None, *l),
            [t, t2, l] => (*t, Some(*t2), *l),
            _ => {
                return Err(TextError::Malformed {
                    line: line_no,
                    msg: format!("expected 2 or 3 columns, got {}", cols.len()),
                })
            }
        };
        let label = match label.trim().parse::<usize>() {
            Ok(l) => l,
            Err(_) if line_no == 1 => continue,
            Err(e) => {
                return Err(TextError::Malformed {
                    line: line_no,
                    msg: format!("label: {e}"),
                })
            }
        };
        rows.push(RawRow {
            line: line_no,
            text: text.to_string(),
            text2: text2.map(str::to_string),
            label,
        });
    }
    build(rows, schema)
}

pub fn to_record(sample: &Sample, vocab: &Vocab, synthetic: bool) -> JsonlRecord {
    JsonlRecord {
        text: vocab.detokenize(sample.first()),
        text2: sample.second().map(|s| vocab.detokenize(s)),
        label: sample.label,
        synthetic,
    }
}

/// Writes one record per sample (class-major), preceded by an optional
/// `{"provenance": ...}` header line.
pub fn write_jsonl<W: Write>(
    dataset: &LabeledDataset,
    mut w: W,
    synthetic: bool,
    provenance: Option<&serde_json::Value>,
) -> Result<(), TextError> {
    if let Some(p) = provenance {
        let header = serde_json::json!({ "provenance": p });
        writeln!(w, "{header}")?;
    }
    for s in dataset.iter() {
        let rec = to_record(s, dataset.vocab(), synthetic);
        writeln!(
            w,
            "{}",
            serde_json::to_string(&rec).expect("record serializes")
        )?;
    }
    Ok(())
}
