use crate::error::Result;
use crate::model::config::PILOT_SYMBOL;
use crate::model::EncoderNet;
use crate::scalar::Real;

/// Five consecutive symbols `(data_prev, pilot, data, pilot, data_next)`,
/// `5n` interleaved samples, labelled with the middle data symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingFrame<T> {
    pub samples: Vec<T>,
    pub label: usize,
}

/// Encodes the frame with one shared encoder instance.
pub fn assemble_training_frame<T: Real>(
    encoder: &EncoderNet<T>,
    prev: usize,
    cur: usize,
    next: usize,
) -> Result<TrainingFrame<T>> {
    let x = encoder.encode_batch(&[prev, PILOT_SYMBOL, cur, PILOT_SYMBOL, next])?;
    Ok(TrainingFrame {
        samples: x.into_data(),
        label: cur,
    })
}
