pub mod classifier;
pub mod codec;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metaset;
pub mod predictors;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
