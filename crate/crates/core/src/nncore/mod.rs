//! Minimal neural network substrate: dense `f64` tensors, a reverse-mode
//! gradient tape, GRU cells, the Adam optimizer, and a seeded RNG.
//!
//! Everything here is deliberately small and explicit. Models in this
//! workbench are a few hundred thousand parameters, sequences are short, and
//! reproducibility matters more than raw throughput, so the tape records every
//! op eagerly and rejects non-finite values at op boundaries instead of letting
//! NaNs travel.

mod adam;
mod gru;
mod rng;
mod tape;
mod tensor;

pub use adam::{reduce_lr_on_plateau, Adam, AdamConfig};
pub use gru::{
    gru_cell_forward, gru_cell_step, gru_step_values, GruCellNodes, GruCellParams, GruScratch,
};
pub use rng::Rng;
pub use tape::{Gradients, NodeId, Tape};
pub use tensor::Tensor;

use thiserror::Error;

/// Errors from tensor construction, tape ops, and optimizer steps.
#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },
    #[error("non-finite value produced by {op} at flat index {index}")]
    NonFinite { op: &'static str, index: usize },
    #[error("tensor shape {shape:?} does not match data length {len}")]
    BadConstruction { shape: Vec<usize>, len: usize },
    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("loss is not connected to any trainable parameter")]
    DetachedGraph,
    #[error("{what} is empty")]
    Empty { what: &'static str },
    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },
}

pub type Result<T> = std::result::Result<T, NnError>;
