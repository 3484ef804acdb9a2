pub mod data;
pub mod error;
pub mod eval;
pub mod layers;
pub mod scoring;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
