//! Generator pretraining and production of the final distilled dataset.

mod generate;
mod pretrain;

pub use generate::{
    generate_distilled, write_sample_sheet, DistilledDataset, GenerateConfig, Provenance,
};
pub use pretrain::{
    pretrain_generator, train_feature_extractor, FeatureConfig, PretrainConfig, PretrainOutcome,
};

use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::coreset::CoresetError;
use crate::models::ModelError;
use crate::text::TextError;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Coreset(#[from] CoresetError),
    #[error("pretraining diverged at step {step} (loss {loss})")]
    Diverged { step: usize, loss: f64 },
    #[error(
        "class {class}: only {distinct} distinct samples from {drawn} draws, need {dpc}; \
         try a larger oversample factor"
    )]
    TooFewDistinct {
        class: usize,
        distinct: usize,
        drawn: usize,
        dpc: usize,
    },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("dpc and oversample must be >= 1")]
    ZeroCount,
}
