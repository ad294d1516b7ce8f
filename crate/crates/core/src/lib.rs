pub mod augment;
pub mod bayesopt;
pub mod cli;
pub mod consensus;
pub mod error;
pub mod fusion;
pub mod metrics;
pub mod rng;
pub mod simclf;
pub mod stats;
pub mod volume;

pub use error::{Error, Result};
