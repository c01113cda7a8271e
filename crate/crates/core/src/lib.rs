//! Singing-voice synthesis with a stripe-pooling U-net.
//!
//! The crate turns frame-aligned note and phoneme sequences into 513-bin
//! linear magnitude spectrograms, vocodes them with Griffin-Lim, and scores
//! the result with mel-cepstral distortion, F0 and voicing metrics.

pub mod corpus;
pub mod dsp;
pub mod error;
pub mod model;
pub mod score;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
