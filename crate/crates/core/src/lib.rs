//! Equation-aware contrastive learning toolkit for math word problems.
//!
//! The pipeline: ingest problems into slot-normalized records ([`corpus`]),
//! parse their equations ([`equation`]), enrich the candidate pool with
//! question reordering and reversed-operation augments ([`augment`]), mine
//! hard triplets by equation tree-edit similarity and then text similarity
//! ([`similarity`], [`retrieval`]), and train a small encoder with an
//! in-batch InfoNCE objective ([`trainer`]).

pub mod augment;
pub mod corpus;
pub mod equation;
pub mod numeric;
pub mod retrieval;
pub mod similarity;
pub mod trainer;

pub use augment::{AugmentError, AugmentMethod, AugmentedRecord};
pub use corpus::{load_corpus, Corpus, CorpusError, Origin, ProblemRecord};
pub use equation::{parse_equation, EquationError, EquationTree, Leaf, Operator, SlotId, Slots};
pub use retrieval::{CandidatePool, EqStrategy, RetrievalError, TextMetric, TripletPair};
pub use similarity::{EmbeddingTable, SimilarityMatrix};
pub use trainer::{EncoderParams, TrainConfig, TrainError};
