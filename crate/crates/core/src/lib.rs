//! Reliable communication-efficient secret sharing.
//!
//! A dealer splits a secret into `n` shares with a universal Staircase code so
//! that a user contacting any `d` parties (`k <= d <= n`) downloads only the
//! minimum number of symbols. Corruption by up to `z_w` parties is handled two
//! ways:
//!
//! * **limited knowledge**: pairwise inner-product hashes, themselves Shamir
//!   shared, let the user spot and drop corrupted parties;
//! * **omniscient**: the Staircase columns are Reed-Solomon codewords and are
//!   decoded with Berlekamp-Welch.
//!
//! The crate also carries the capacity and cost formulas, a flow-graph min-cut
//! analyzer, and a Monte Carlo adversary simulator.

pub mod adversary;
pub mod error;
pub mod field;
pub mod flowgraph;
pub mod hashing;
pub mod scheme;
pub mod staircase;

pub use error::{Error, Result};
pub use field::{Field, Matrix, Packet};
pub use scheme::{AdversaryBudget, Mode, SchemeParams};
