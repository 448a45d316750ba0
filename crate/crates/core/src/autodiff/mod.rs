//! Reverse-mode differentiation over dense `f64` arrays, plus the parameter
//! store, optimizers and checkpoint format the models build on.

mod checkpoint;
mod graph;
mod optim;
mod params;
mod tensor;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, MAGIC};
pub use graph::{cosine_distance, cosine_distance_grad, dot_raw, matmul_raw, sigmoid, Graph, Var};
pub use optim::{warmup_cosine, Optimizer, OptimizerKind, StepStats};
pub use params::{ParamId, ParamSet};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: invalid shape {shape:?}, expected {expected}")]
    InvalidShape {
        op: &'static str,
        shape: Vec<usize>,
        expected: &'static str,
    },
    #[error("{op}: index {index} out of range (bound {bound})")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("{op}: {side} operand has zero norm")]
    ZeroNorm {
        op: &'static str,
        side: &'static str,
    },
    #[error("backward requires a scalar root, got shape {shape:?}")]
    NonScalarRoot { shape: Vec<usize> },
    #[error("non-finite gradient in parameter `{param}` at element {index}")]
    NonFiniteGradient { param: String, index: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
