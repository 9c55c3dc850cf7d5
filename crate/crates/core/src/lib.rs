//! Streaming joint punctuation prediction and disfluency detection with a
//! controllable time-delay Transformer encoder.

pub mod config;
pub mod data;
pub mod decoding;
pub mod error;
pub mod eval;
pub mod masks;
pub mod model;
pub mod numcore;
pub mod training;

pub use error::{Error, Result};
