//! Independent reference implementations used as oracles in tests.
//!
//! Everything here is written the slow, obvious way on purpose: scalar loops,
//! explicit double sums, full recomputation at every step. None of it shares
//! code with the optimized paths in `awe-core`, so agreement between the two
//! is evidence, not tautology. Production code must never call this crate;
//! it is wired in as a dev-dependency only.

pub mod cka_ref;
pub mod fd;
pub mod gru_ref;
pub mod map_ref;
pub mod ward_ref;
pub mod xml;
