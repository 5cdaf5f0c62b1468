//! One batched pass through encoder, training channel and decoder, with the
//! exact reverse pass back to every encoder and decoder parameter.

use crate::channel::{channel_apply, channel_backward, ChannelDraws, ChannelParams, RngStream};
use crate::diffnet::{argmax, softmax_cross_entropy, TensorOf};
use crate::error::{Error, Result};
use crate::model::config::PILOT_SYMBOL;
use crate::model::Autoencoder;
use crate::scalar::Real;

/// `(previous, current, next)` data symbols of one training frame; the label
/// is the current symbol.
pub type SymbolTriple = [usize; 3];

/// Draws `batch` frames with i.i.d. uniform symbols.
pub fn sample_training_batch(rng: &mut RngStream, m: usize, batch: usize) -> Vec<SymbolTriple> {
    (0..batch)
        .map(|_| {
            let mut t = [0; 3];
            t.iter_mut().for_each(|s| *s = rng.below(m as u64) as usize);
            t
        })
        .collect()
}

/// Encoder input rows: the pilot once, then all previous, current and next
/// symbols. Every frame reuses the single pilot row.
fn encoder_rows(batch: &[SymbolTriple]) -> Vec<usize> {
    let mut rows = Vec::with_capacity(3 * batch.len() + 1);
    rows.push(PILOT_SYMBOL);
    for slot in 0..3 {
        rows.extend(batch.iter().map(|t| t[slot]));
    }
    rows
}

/// Row of the encoder output used by frame segment `seg` of frame `b`.
fn segment_row(seg: usize, b: usize, batch: usize) -> usize {
    match seg {
        0 => 1 + b,
        2 => 1 + batch + b,
        4 => 1 + 2 * batch + b,
        _ => 0,
    }
}

/// Forward and backward result of one batch.
#[derive(Debug, Clone)]
pub struct BatchOutcome<T> {
    pub loss: T,
    /// Fraction of frames whose argmax equals the label.
    pub accuracy: f64,
    pub draws: Vec<ChannelDraws>,
    /// Gradients in [`Autoencoder::params`] order.
    pub grads: Vec<TensorOf<T>>,
}

/// Runs the composite network on `batch`. Channel draws come from `rng`:
/// per frame, the phase/attenuation/offset draws followed by its noise.
pub fn forward_backward<T: Real>(
    model: &Autoencoder<T>,
    batch: &[SymbolTriple],
    channel: &ChannelParams,
    rng: &mut RngStream,
) -> Result<BatchOutcome<T>> {
    let cfg = model.config();
    let (n, w, bsz) = (cfg.n, cfg.window(), batch.len());
    if bsz == 0 {
        return Err(Error::Shape("empty batch".into()));
    }
    let rows = encoder_rows(batch);
    let enc = model.encoder.forward_trace(&rows)?;
    let x = enc.stack.output();

    let mut windows = Vec::with_capacity(bsz * 2 * w);
    let mut draws = Vec::with_capacity(bsz);
    let mut frame = Vec::with_capacity(10 * n);
    for b in 0..bsz {
        frame.clear();
        for seg in 0..5 {
            frame.extend_from_slice(x.row(segment_row(seg, b, bsz)));
        }
        let d = channel.draw(n, rng);
        windows.extend(channel_apply(&frame, n, channel, &d, rng)?);
        draws.push(d);
    }
    let windows = TensorOf::new(vec![bsz, 2 * w], windows)?;
    let dec = model.decoder.forward_trace(&windows)?;
    let labels: Vec<usize> = batch.iter().map(|t| t[1]).collect();
    let logits = dec.trunk.output();
    let (loss, _, g_logits) = softmax_cross_entropy(logits, &labels)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            index: model.decoder.trunk.layers().len(),
            name: "cross-entropy".into(),
        });
    }
    let correct = (0..bsz).filter(|&b| argmax(logits.row(b)) == labels[b]).count();

    let (g_windows, dec_grads) = model.decoder.backward(&dec, &g_logits)?;
    let mut g_x = TensorOf::zeros(x.shape());
    for (b, d) in draws.iter().enumerate() {
        let g_frame = channel_backward(g_windows.row(b), n, d)?;
        for seg in 0..5 {
            let row = g_x.row_mut(segment_row(seg, b, bsz));
            for (acc, g) in row.iter_mut().zip(&g_frame[seg * 2 * n..(seg + 1) * 2 * n]) {
                *acc += *g;
            }
        }
    }
    let mut grads = model.encoder.backward(&enc, &g_x)?;
    grads.extend(dec_grads);
    Ok(BatchOutcome {
        loss,
        accuracy: correct as f64 / bsz as f64,
        draws,
        grads,
    })
}

/// Loss of the composite network with the channel randomness fixed by `seed`,
/// plus a signature of all discrete branches. Used by the gradient oracle.
pub fn composite_loss<T: Real>(
    model: &Autoencoder<T>,
    batch: &[SymbolTriple],
    channel: &ChannelParams,
    seed: u64,
) -> Result<(T, u64)> {
    let cfg = model.config();
    let n = cfg.n;
    let mut rng = RngStream::new(seed);
    let rows = encoder_rows(batch);
    let enc = model.encoder.forward_trace(&rows)?;
    let x = enc.stack.output();
    let mut windows = Vec::new();
    for b in 0..batch.len() {
        let frame: Vec<T> = (0..5)
            .flat_map(|seg| x.row(segment_row(seg, b, batch.len())).to_vec())
            .collect();
        let d = channel.draw(n, &mut rng);
        windows.extend(channel_apply(&frame, n, channel, &d, &mut rng)?);
    }
    let windows = TensorOf::new(vec![batch.len(), 2 * cfg.window()], windows)?;
    let dec = model.decoder.forward_trace(&windows)?;
    let labels: Vec<usize> = batch.iter().map(|t| t[1]).collect();
    let (loss, _, _) = softmax_cross_entropy(dec.trunk.output(), &labels)?;
    let sig = model.encoder.stack.branch_signature(&enc.stack).rotate_left(7)
        ^ model.decoder.branch_signature(&dec);
    Ok((loss, sig))
}
