//! Small contrastive encoder.
//!
//! A bag-of-tokens mean-pooling encoder is trained with the in-batch InfoNCE
//! loss over retrieved triplets plus a template-classification loss standing
//! in for an equation decoder: `L = L_solver + alpha * L_cl`. Gradients are
//! derived by hand; optimisation is plain SGD.

mod checkpoint;
mod loss;
mod params;
mod train;

use thiserror::Error;

pub use loss::{cosine_with_grad, info_nce_loss, info_nce_with_grad, softmax_cross_entropy, InfoNceGrad};
pub use params::{EncoderParams, OTHER_CLASS, UNK_TOKEN};
pub use train::{
    batch_loss, batch_loss_and_grad, dump_embeddings, embedding_table, encode_triplets,
    eval_representation, train, train_step, EncodedTriplet, EvalMetrics, Gradients, LossParts,
    StepMetrics,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("record `{0}` has no tokens")]
    EmptyText(String),
    #[error("zero-norm representation")]
    ZeroVector,
    #[error("non-finite gradient at step {0}")]
    NonFiniteGradient(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("triplet references unknown record `{0}`")]
    UnknownRecord(String),
    #[error("no triplets to train on")]
    NoTriplets,
    #[error("checkpoint line {line}: {reason}")]
    Checkpoint { line: usize, reason: String },
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for TrainError {
    fn from(e: std::io::Error) -> Self {
        TrainError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Softmax temperature.
    pub tau: f64,
    /// Weight of the contrastive term.
    pub alpha: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub steps: usize,
    /// Embedding width.
    pub dim: usize,
    /// Number of template classes (before a possible catch-all class).
    pub top_k: usize,
    pub seed: u64,
    pub include_augments_as_anchors: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            tau: 0.1,
            alpha: 0.5,
            batch_size: 16,
            learning_rate: 1.0,
            steps: 500,
            dim: 64,
            top_k: 5,
            seed: 0,
            include_augments_as_anchors: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau must be positive");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.dim < 2 {
            return bad("dim must be at least 2");
        }
        if self.top_k < 1 {
            return bad("top_k must be at least 1");
        }
        Ok(())
    }
}
