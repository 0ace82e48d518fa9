//! Equation and text similarity kernels.

pub mod bleu;
pub mod embedding;
pub mod matrix;
pub mod ted;

use thiserror::Error;

pub use bleu::{bi_bleu, bleu};
pub use embedding::{cosine_similarity, EmbeddingTable};
pub use matrix::SimilarityMatrix;
pub use ted::{equation_similarity, ordered_tree_distance, tree_edit_distance, NodeLabel, OrderedTree};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimilarityError {
    #[error("empty token sequence")]
    EmptyInput,
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("zero vector")]
    ZeroVector,
    #[error("non-finite value in embedding `{0}`")]
    NonFinite(String),
    #[error("duplicate template `{0}`")]
    DuplicateTemplate(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for SimilarityError {
    fn from(e: std::io::Error) -> Self {
        SimilarityError::Io(e.to_string())
    }
}
