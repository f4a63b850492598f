//! Pipeline stages behind the `awe` binary, exposed as a library so
//! integration tests can drive runs in-process.

pub mod analyze;
pub mod artifacts;
pub mod config;
pub mod data;
pub mod embed;
pub mod error;
pub mod eval;
pub mod report;
pub mod synth;
pub mod train;
