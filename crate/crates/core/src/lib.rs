pub mod datagen;
pub mod domain;
pub mod error;
pub mod eval;
pub mod gan;
pub mod marginal;
pub mod privacy;
pub mod synth;

pub use error::{Error, Result};
