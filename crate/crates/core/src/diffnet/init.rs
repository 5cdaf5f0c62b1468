//! Parameter initialisation.

use super::layers::{Conv1d, Dense, Embedding};
use super::tensor::TensorOf;
use crate::channel::RngStream;
use crate::scalar::Real;

/// Half-width of the uniform embedding initialisation.
pub const EMBEDDING_INIT_RANGE: f64 = 0.05;

fn uniform<T: Real>(shape: &[usize], limit: f64, rng: &mut RngStream) -> TensorOf<T> {
    let len = shape.iter().product();
    let data = (0..len)
        .map(|_| T::of(rng.uniform_range(-limit, limit)))
        .collect();
    TensorOf::new(shape.to_vec(), data).expect("init shape")
}

/// Glorot-uniform weights, zero bias.
pub fn dense<T: Real>(fan_in: usize, fan_out: usize, rng: &mut RngStream) -> Dense<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Dense {
        weight: uniform(&[fan_out, fan_in], limit, rng),
        bias: TensorOf::zeros(&[fan_out]),
    }
}

/// Glorot-uniform kernels with receptive-field fan sizes, zero bias.
pub fn conv1d<T: Real>(
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    rng: &mut RngStream,
) -> Conv1d<T> {
    let limit = (6.0 / (kernel * (in_channels + out_channels)) as f64).sqrt();
    Conv1d {
        kernel: uniform(&[out_channels, kernel, in_channels], limit, rng),
        bias: TensorOf::zeros(&[out_channels]),
    }
}

pub fn embedding<T: Real>(vocab: usize, dim: usize, rng: &mut RngStream) -> Embedding<T> {
    Embedding {
        table: uniform(&[vocab, dim], EMBEDDING_INIT_RANGE, rng),
    }
}
