pub mod checks;
pub mod cli;
pub mod data;
pub mod encoder;
pub mod error;
pub mod fusion;
pub mod lstm;
pub mod nn;
pub mod numerics;
pub mod output;
pub mod simta;
pub mod survival;
pub mod train;

pub use error::{Error, Result};
