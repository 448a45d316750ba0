//! The class-conditional generator and the classifier ("learner") whose head
//! gradients define the matching objective.

mod generator;
mod init;
mod learner;
mod sampling;

pub use generator::{Generated, GeneratorConfig, GeneratorModel};
pub use learner::{Arch, FlatGradient, LearnerConfig, LearnerModel};
pub use sampling::{nucleus, sample_index};

use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::text::TextError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("sequence of length {0} has no predicted position (need >= 2)")]
    SequenceTooShort(usize),
    #[error("empty batch")]
    EmptyBatch,
    #[error("checkpoint does not match model layout: {0}")]
    LayoutMismatch(String),
}
