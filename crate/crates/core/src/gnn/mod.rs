//! Trainable graph networks: Chebyshev spectral convolutions, spatial
//! message passing, sum readout with an MLP head, manual reverse-mode
//! gradients, and mini-batch Adam training over block-diagonal batches.

mod batch;
pub(crate) mod layers;
mod linalg;
mod model;
pub mod ops;
mod train;

pub use batch::Batch;
pub use layers::{ChebLayer, LayerParams, SpatialLayer};
pub use model::{backward, forward, LayerKind, Model, ModelConfig, ModelGrads, Readout, NUM_CLASSES};
pub use ops::{accuracy, argmax, cross_entropy, softmax};
pub use train::{
    batch_loss, evaluate, finite_difference_grads, train, EpochMetrics, EvalMetrics,
    TrainConfig, TrainHistory,
};

use thiserror::Error;

use crate::spectral::SpectralError;

#[derive(Debug, Error)]
pub enum GnnError {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch { what: &'static str, expected: usize, got: usize },
    #[error("class index {class} is out of range")]
    InvalidClass { class: u8 },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("graph {index} has no label")]
    MissingLabel { index: usize },
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(&'static str),
    #[error("gradient check failed at parameter {param}: relative error {relative_error:.3e}")]
    GradientCheck { param: usize, relative_error: f64 },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
