//! Attention-based cross-series forecaster: learnable Holt detrending, anchor-normalized
//! segment embeddings, and dot-product attention over segments from every region.

mod holt;
mod model;
mod segments;
pub mod tape;

pub use holt::{detrend, Detrended, HoltState};
pub use model::{
    attention_forward, forecast, full_space, reduced_space, train, train_with, ActsData, ActsHyper, ActsModel,
    CHECKPOINT_FORMAT, CHECKPOINT_VERSION, EPOCHS, HIDDEN, PARAM_NAMES, RATES,
};
pub use segments::{build_segments, Segment, SegmentSet, DEGENERATE_FLOOR, DEGENERATE_RATIO};
pub use tape::{grad_check, Tape, Tensor, Var};
