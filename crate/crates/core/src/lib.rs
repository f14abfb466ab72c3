pub mod continual;
pub mod error;
pub mod eval;
mod fsutil;
pub mod numeric;
pub mod policy;
pub mod reward;
pub mod stats;
pub mod tasks;
pub mod trainer;

pub use error::{Error, Result};
