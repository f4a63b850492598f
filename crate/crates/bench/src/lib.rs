//! Shared helpers for benchmark inputs.
