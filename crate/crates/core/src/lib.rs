//! Learned end-to-end modem.
//!
//! An encoder network maps each `k`-bit symbol to `n` complex baseband
//! samples, a differentiable channel applies phase, attenuation, noise and a
//! time offset, and a decoder network classifies a `3n - 1` sample window
//! that always covers one complete data symbol. Pilots (symbol 0) are
//! interleaved 1:1 with data so the decoder learns timing on its own.
//!
//! Everything numeric is generic over [`Real`]; the aliases below fix the
//! deployment precision to `f32`.

pub mod bench;
pub mod channel;
pub mod diffnet;
pub mod error;
pub mod model;
pub mod scalar;
pub mod runtime;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Tensor = diffnet::TensorOf<f32>;
pub type Encoder = model::EncoderNet<f32>;
pub type Decoder = model::DecoderNet<f32>;
pub type Model = model::Autoencoder<f32>;
pub type Bundle = model::WeightBundle<f32>;
