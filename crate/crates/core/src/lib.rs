//! Text dataset distillation by training a class-conditional generator so
//! that probability-weighted learner gradients on its samples match those of
//! real data.
//!
//! Everything runs on a small tape-based autodiff engine over `f64`, so the
//! library has no native dependencies and builds for `wasm32`.

pub mod autodiff;
pub mod coreset;
pub mod distill;
pub mod eval;
pub mod models;
pub mod pipeline;
pub mod seeds;
pub mod synthesis;
pub mod text;
