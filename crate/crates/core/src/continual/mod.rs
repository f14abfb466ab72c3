//! Coreset replay buffer and synaptic-importance tracking.

pub mod coreset;
pub mod si;

pub use coreset::{sample_coreset, update_coreset, Coreset, CoresetEntry};
pub use si::{compute_si, si_accumulate, SiAccumulator, SiRegularizer};
