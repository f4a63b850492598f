//! Workbench for studying how acoustic word embedding encoders trained on one
//! language represent speech from another.
//!
//! The pipeline: [`synthlang`] generates small synthetic languages and renders
//! spoken-word segments, [`features`] turns audio into log-mel sequences,
//! [`corpus`] packages segments into train/validation/test splits, [`encoders`]
//! trains recurrent embedding models under three objectives, [`eval`] scores
//! them with same/different word discrimination, and [`rsa`] plus [`cluster`]
//! quantify cross-lingual representational similarity (CKA matrices, Ward
//! trees).
//!
//! All numeric work is `f64` end to end, and every stage draws randomness from
//! a seeded generator so runs reproduce bit-for-bit.

pub mod cluster;
pub mod corpus;
pub mod encoders;
pub mod eval;
pub mod features;
pub mod nncore;
pub mod rsa;
pub mod synthlang;

pub use cluster::MergeTree;
pub use corpus::{Corpus, SegmentRecord};
pub use encoders::{EmbeddingMatrix, EncoderModel, Objective, TrainConfig};
pub use eval::{EvalSet, RelevanceMode};
pub use features::FeatureSequence;
pub use nncore::{Rng, Tensor};
pub use rsa::{Kernel, Xrsm};
pub use synthlang::{LanguageSpec, SpeakerModel};
