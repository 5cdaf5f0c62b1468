//! Encoder and decoder networks of the transceiver and their on-disk form.

pub mod bundle;
pub mod config;
pub mod decoder;
pub mod encoder;

pub use bundle::{LayerRecord, TrainingMetadata, WeightBundle, FORMAT_VERSION};
pub use config::ModelConfig;
pub use decoder::{DecoderNet, DecoderTrace};
pub use encoder::{EncoderNet, EncoderTrace};

use crate::channel::RngStream;
use crate::diffnet::TensorOf;
use crate::error::Result;
use crate::scalar::Real;

/// Stream key used to derive the initialisation generator from a seed.
const INIT_STREAM: u64 = 0x1417;

/// Encoder and decoder trained together.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder<T> {
    pub encoder: EncoderNet<T>,
    pub decoder: DecoderNet<T>,
}

impl<T: Real> Autoencoder<T> {
    /// Freshly initialised networks; the draw sequence depends only on `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = RngStream::keyed(seed, INIT_STREAM);
        Ok(Self {
            encoder: EncoderNet::build(config, &mut rng)?,
            decoder: DecoderNet::build(config, &mut rng)?,
        })
    }

    pub fn config(&self) -> ModelConfig {
        self.encoder.config()
    }

    pub fn params(&self) -> Vec<&TensorOf<T>> {
        let mut p = self.encoder.params();
        p.extend(self.decoder.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut TensorOf<T>> {
        let mut p = self.encoder.params_mut();
        p.extend(self.decoder.params_mut());
        p
    }

    /// Parameter tensors with qualified names (`encoder.dense1.weight`, ...).
    pub fn named_params(&self) -> Vec<(String, &TensorOf<T>)> {
        let enc = self.encoder.named_params().into_iter().map(|(n, p)| (format!("encoder.{n}"), p));
        let dec = self.decoder.named_params().into_iter().map(|(n, p)| (format!("decoder.{n}"), p));
        enc.chain(dec).collect()
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }
}
