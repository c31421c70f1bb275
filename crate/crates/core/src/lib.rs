//! Conjunctive-query answering over incomplete knowledge graphs through
//! tree-like approximations.
//!
//! Cyclic conjunctive queries are rewritten into their depth-bounded
//! unravelings, which are tree-like, contain the original query and are the
//! tightest such approximation of that depth. Tree-like queries are then run
//! either exactly ([`eval`]) or over a link predictor with fuzzy set
//! semantics ([`fuzzy`]), where unanchored leaves are encoded as the all-ones
//! vector.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! parallel drivers live in the companion `unravel` crate.
#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

mod csp;

pub mod embed;
pub mod error;
pub mod eval;
pub mod fuzzy;
pub mod homomorphism;
pub mod kg;
pub mod metrics;
pub mod plan;
pub mod predictor;
pub mod query;
pub mod querygen;
pub mod synth;
pub mod unravel;

pub use error::{Error, Result};
pub use kg::{Direction, EntityId, GraphBuilder, KnowledgeGraph, RelationId, Triple};
pub use query::{Atom, ConjunctiveQuery, Term};

/// Mixes a base seed with a unit index into an independent stream seed.
///
/// Every randomized driver derives per-unit seeds through this so that the
/// output never depends on how units are scheduled.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined words
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
