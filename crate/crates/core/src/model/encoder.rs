//! Transmitter network: symbol index to `n` complex samples inside the unit disk.

use super::config::ModelConfig;
use crate::channel::RngStream;
use crate::diffnet::{init, Embedding, Layer, LayerSpec, Sequential, TensorOf, Trace};
use crate::error::Result;
use crate::scalar::Real;

/// `Embedding(M, M) -> Dense+ReLU(M) -> Dense+ReLU(2n) -> Dense(2n) -> unit-disk
/// normalization -> complex packing`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderNet<T> {
    config: ModelConfig,
    pub embedding: Embedding<T>,
    pub stack: Sequential<T>,
}

/// Intermediate values kept for the reverse pass.
#[derive(Debug, Clone)]
pub struct EncoderTrace<T> {
    pub symbols: Vec<usize>,
    pub stack: Trace<T>,
}

impl<T: Real> EncoderNet<T> {
    pub fn build(config: ModelConfig, rng: &mut RngStream) -> Result<Self> {
        config.validate()?;
        let (m, w) = (config.m(), 2 * config.n);
        let embedding = init::embedding(m, m, rng);
        let mut stack = Sequential::new();
        stack
            .push("dense1", Layer::Dense(init::dense(m, m, rng)))
            .push("relu1", Layer::Relu)
            .push("dense2", Layer::Dense(init::dense(m, w, rng)))
            .push("relu2", Layer::Relu)
            .push("dense3", Layer::Dense(init::dense(w, w, rng)))
            .push("normalize", Layer::NormalizeComplex)
            .push("real2complex", Layer::RealToComplex);
        Ok(Self { config, embedding, stack })
    }

    pub fn config(&self) -> ModelConfig {
        self.config
    }

    /// Layer specs in order, including the leading embedding.
    pub fn layer_specs(&self) -> Vec<(String, LayerSpec)> {
        let mut out = vec![(
            "embedding".to_string(),
            LayerSpec::Embedding {
                vocab: self.embedding.vocab(),
                dim: self.embedding.dim(),
            },
        )];
        out.extend(self.stack.layers().iter().map(|(n, l)| (n.clone(), l.spec())));
        out
    }

    pub fn param_count(&self) -> usize {
        self.layer_specs().iter().map(|(_, s)| s.param_count()).sum()
    }

    pub fn params(&self) -> Vec<&TensorOf<T>> {
        let mut p = vec![&self.embedding.table];
        p.extend(self.stack.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut TensorOf<T>> {
        let mut p = vec![&mut self.embedding.table];
        p.extend(self.stack.params_mut());
        p
    }

    pub fn named_params(&self) -> Vec<(String, &TensorOf<T>)> {
        let mut p = vec![("embedding".to_string(), &self.embedding.table)];
        p.extend(self.stack.named_params());
        p
    }

    /// Encodes a batch of symbols into `[batch, n, 2]` interleaved samples.
    pub fn encode_batch(&self, symbols: &[usize]) -> Result<TensorOf<T>> {
        let h = self.embedding.forward(symbols)?;
        self.stack.forward(&h)
    }

    /// `n` complex samples, interleaved `(re, im)`.
    pub fn encode(&self, symbol: usize) -> Result<Vec<T>> {
        Ok(self.encode_batch(&[symbol])?.into_data())
    }

    pub fn forward_trace(&self, symbols: &[usize]) -> Result<EncoderTrace<T>> {
        let h = self.embedding.forward(symbols)?;
        Ok(EncoderTrace {
            symbols: symbols.to_vec(),
            stack: self.stack.forward_trace(&h)?,
        })
    }

    /// Parameter gradients in [`EncoderNet::params`] order.
    pub fn backward(&self, trace: &EncoderTrace<T>, grad_out: &TensorOf<T>) -> Result<Vec<TensorOf<T>>> {
        let (g_emb, mut grads) = self.stack.backward(&trace.stack, grad_out)?;
        grads.insert(0, self.embedding.backward(&trace.symbols, &g_emb));
        Ok(grads)
    }

    /// Every symbol's waveform, `[M, n, 2]`.
    pub fn constellation(&self) -> Result<TensorOf<T>> {
        let all: Vec<usize> = (0..self.config.m()).collect();
        self.encode_batch(&all)
    }
}
