//! Tokens, labeled samples, the class-conditional encoding consumed by the
//! generator, file formats, and the synthetic desk-scale tasks.

mod dataset;
mod io;
mod tasks;
mod vocab;

pub use dataset::{
    decode_generated, encode_for_generator, encode_for_learner, LabeledDataset, Sample,
};
pub use io::{load_jsonl, load_tsv, read_jsonl_str, write_jsonl, JsonlRecord, LoadSchema};
pub use tasks::{make_synthetic_task, TaskKind};
pub use vocab::{TokenizerKind, Vocab};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("token id {0} is not a content token")]
    NotContent(usize),
    #[error("label {label} outside [0, {classes})")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("class {0} has no samples")]
    EmptyClass(usize),
    #[error("invalid vocabulary: {0}")]
    InvalidVocab(String),
    #[error("invalid encoded sequence: {0}")]
    InvalidEncoding(String),
    #[error("unknown task `{0}` (expected keyword, pair-match or pair-order3)")]
    UnknownTask(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
