//! Transformer-encoder binary classifier for tabular rows.
//!
//! Each feature of a row becomes one token through a per-feature affine lift
//! plus a fixed sinusoidal positional encoding. Gradients are computed by a
//! hand-written reverse pass and applied with Adam. Everything runs in `f64`.

mod adam;
mod config;
mod model;
mod params;
mod train;

pub use adam::{adam_step, AdamState};
pub use config::{ModelShape, TransformerConfig};
pub use model::{
    backward, class_probabilities, cross_entropy, embed, forward, label_from_logits, layer_norm,
    loss_and_gradients, multi_head_attention, predict, softmax, ForwardPass, Predictions,
    LAYER_NORM_EPS,
};
pub use params::{positional_encoding, LayerSpans, ModelFileError, ModelParams, ParamLayout, TensorSpan};
pub use train::{accuracy, train, TrainReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid transformer config: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("training data must contain both classes")]
    SingleClass,
    #[error("empty batch")]
    EmptyBatch,
    #[error("loss is not finite")]
    NonFiniteLoss,
    #[error("training diverged at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
}
