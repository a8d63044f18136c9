pub mod error;
pub mod text;

pub use error::{Error, Result};
pub mod arena;
pub mod bot;
pub mod engine;
pub mod snapshot;
pub mod synth;
pub mod training;
