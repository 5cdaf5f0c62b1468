//! Symbol error rate estimation over the simulated channel, SNR sweeps and the
//! uncoded BPSK reference.

use serde::{Deserialize, Serialize};

use crate::channel::{channel_apply, es_to_eb, ChannelParams, RngStream};
use crate::diffnet::TensorOf;
use crate::error::{Error, Result};
use crate::model::config::PILOT_SYMBOL;
use crate::model::Autoencoder;
use crate::scalar::Real;

/// Symbols per evaluation chunk; chunk `c` uses its own stream, so results
/// do not depend on how chunks are spread over workers.
pub const EVAL_CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub model: String,
    pub es_n0_db: f64,
    pub eb_n0_db: f64,
    pub symbols: u64,
    pub errors: u64,
    pub ser: f64,
}

impl SweepRecord {
    pub fn new(model: String, es_n0_db: f64, k: usize, n: usize, symbols: u64, errors: u64) -> Self {
        Self {
            model,
            es_n0_db,
            eb_n0_db: es_to_eb(es_n0_db, k, n),
            symbols,
            errors,
            ser: errors as f64 / symbols as f64,
        }
    }

    /// Binomial standard deviation of the estimate.
    pub fn sigma(&self) -> f64 {
        (self.ser * (1.0 - self.ser) / self.symbols as f64).sqrt()
    }
}

fn worker_count() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Errors in one chunk of `count` trials.
fn eval_chunk<T: Real>(
    model: &Autoencoder<T>,
    constellation: &TensorOf<T>,
    channel: &ChannelParams,
    count: usize,
    rng: &mut RngStream,
) -> Result<u64> {
    crate::scalar::flush_subnormals();
    let cfg = model.config();
    let (n, m) = (cfg.n, cfg.m() as u64);
    let mut windows = Vec::with_capacity(count * 2 * cfg.window());
    let mut labels = Vec::with_capacity(count);
    let mut frame = Vec::with_capacity(10 * n);
    for _ in 0..count {
        let (prev, cur, next) = (rng.below(m) as usize, rng.below(m) as usize, rng.below(m) as usize);
        frame.clear();
        for s in [prev, PILOT_SYMBOL, cur, PILOT_SYMBOL, next] {
            frame.extend_from_slice(constellation.row(s));
        }
        let d = channel.draw(n, rng);
        windows.extend(channel_apply(&frame, n, channel, &d, rng)?);
        labels.push(cur);
    }
    let windows = TensorOf::new(vec![count, 2 * cfg.window()], windows)?;
    let decided = model.decoder.decide_batch(&windows)?;
    Ok(decided.iter().zip(&labels).filter(|(a, b)| a != b).count() as u64)
}

/// Monte Carlo SER: fresh `(prev, cur, next)` symbols per trial, one channel
/// pass, decoder argmax compared with `cur`.
pub fn evaluate_ser<T: Real>(
    model: &Autoencoder<T>,
    channel: &ChannelParams,
    num_symbols: u64,
    rng: &mut RngStream,
) -> Result<SweepRecord> {
    if num_symbols == 0 {
        return Err(Error::Config("num_symbols must be at least 1".into()));
    }
    channel.validate()?;
    let cfg = model.config();
    let constellation = model.encoder.constellation()?;
    let base = rng.next_u64();
    let chunks = (num_symbols as usize).div_ceil(EVAL_CHUNK);
    let chunk_len = |c: usize| EVAL_CHUNK.min(num_symbols as usize - c * EVAL_CHUNK);
    let workers = worker_count().min(chunks);
    let errors = if workers <= 1 {
        let mut total = 0;
        for c in 0..chunks {
            let mut r = RngStream::keyed(base, c as u64);
            total += eval_chunk(model, &constellation, channel, chunk_len(c), &mut r)?;
        }
        total
    } else {
        std::thread::scope(|scope| -> Result<u64> {
            let handles: Vec<_> = (0..workers)
                .map(|wid| {
                    let constellation = &constellation;
                    scope.spawn(move || -> Result<u64> {
                        let mut total = 0;
                        for c in (wid..chunks).step_by(workers) {
                            let mut r = RngStream::keyed(base, c as u64);
                            total += eval_chunk(model, constellation, channel, chunk_len(c), &mut r)?;
                        }
                        Ok(total)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).sum()
        })?
    };
    Ok(SweepRecord::new(cfg.name(), channel.es_n0_db, cfg.k, cfg.n, num_symbols, errors))
}

/// One [`evaluate_ser`] per SNR point; point `i` uses the stream derived from `(seed, i)`.
pub fn sweep_snr<T: Real>(
    model: &Autoencoder<T>,
    channel: &ChannelParams,
    es_n0_db: &[f64],
    num_symbols: u64,
    seed: u64,
) -> Result<Vec<SweepRecord>> {
    es_n0_db
        .iter()
        .enumerate()
        .map(|(i, &snr)| {
            let mut rng = RngStream::derive(seed, i as u64);
            evaluate_ser(model, &channel.with_es_n0_db(snr), num_symbols, &mut rng)
        })
        .collect()
}

/// Gaussian tail probability `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Uncoded BPSK over AWGN: `Q(sqrt(2 Eb/N0))`.
pub fn bpsk_ser_theoretical(eb_n0_db: f64) -> f64 {
    let ebn0 = 10f64.powf(eb_n0_db / 10.0);
    q_function((2.0 * ebn0).sqrt())
}

/// Monte Carlo BPSK: `+-1` on the real axis of each complex sample, complex
/// noise with `N0 / 2` per component, sign detection. Returns `(errors, ser)`.
pub fn bpsk_ser_montecarlo(eb_n0_db: f64, num_bits: u64, rng: &mut RngStream) -> (u64, f64) {
    let sigma = (10f64.powf(-eb_n0_db / 10.0) / 2.0).sqrt();
    let mut errors = 0;
    for _ in 0..num_bits {
        let bit = rng.below(2) == 1;
        let tx = if bit { 1.0 } else { -1.0 };
        let re = tx + sigma * rng.normal();
        let _im = sigma * rng.normal();
        if (re > 0.0) != bit {
            errors += 1;
        }
    }
    (errors, errors as f64 / num_bits.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bpsk_closed_form_values() {
        assert!((bpsk_ser_theoretical(0.0) - 0.078_649_6).abs() < 1e-6);
        let at_9_6 = bpsk_ser_theoretical(9.6);
        assert!((at_9_6 - 1.0e-5).abs() < 0.1e-5, "{at_9_6}");
    }

    #[test]
    fn q_function_symmetry() {
        assert!((q_function(0.0) - 0.5).abs() < 1e-15);
        for x in [0.3, 1.0, 2.5] {
            assert!((q_function(x) + q_function(-x) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn record_ser_is_ratio() {
        let r = SweepRecord::new("AE-8/8".into(), 5.0, 8, 8, 1000, 25);
        assert_eq!(r.ser, 0.025);
        assert_eq!(r.eb_n0_db, 5.0);
    }
}
