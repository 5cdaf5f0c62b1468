//! Blockwise transmitter and receiver over continuous IQ streams.
//!
//! The transmitter emits `pilot, data_1, pilot, data_2, ...`. The receiver
//! cuts `3n - 1` sample windows every `2n` samples from a fixed start offset
//! and never resynchronises: any start offset places each window at one of
//! the `2n` offsets seen in training.

use std::time::{Duration, Instant};

use super::iq::{IqStream, DEFAULT_SAMPLE_RATE};
use crate::diffnet::TensorOf;
use crate::error::{Error, Result};
use crate::model::config::PILOT_SYMBOL;
use crate::model::{DecoderNet, EncoderNet};
use crate::scalar::Real;

/// Windows decoded per batch by the receiver.
const RX_BATCH: usize = 512;

pub fn tx_stream<T: Real>(encoder: &EncoderNet<T>, symbols: &[usize]) -> Result<IqStream<T>> {
    let cfg = encoder.config();
    if let Some(&bad) = symbols.iter().find(|&&s| s >= cfg.m()) {
        return Err(Error::Domain(format!("symbol {bad} outside 0..{}", cfg.m())));
    }
    let constellation = encoder.constellation()?;
    let mut samples = Vec::with_capacity(symbols.len() * 4 * cfg.n);
    for &s in symbols {
        samples.extend_from_slice(constellation.row(PILOT_SYMBOL));
        samples.extend_from_slice(constellation.row(s));
    }
    IqStream::new(samples, DEFAULT_SAMPLE_RATE)
}

/// Number of receiver windows for a stream of `len` samples.
pub fn window_count(len: usize, start_offset: usize, window: usize, period: usize) -> usize {
    if len < start_offset + window {
        0
    } else {
        (len - start_offset - window) / period + 1
    }
}

/// Decodes windows at `start_offset + j * 2n`, one symbol each.
pub fn rx_stream<T: Real>(decoder: &DecoderNet<T>, iq: &IqStream<T>, start_offset: usize) -> Result<Vec<usize>> {
    crate::scalar::flush_subnormals();
    let cfg = decoder.config();
    let (w, period) = (cfg.window(), cfg.stream_period());
    let count = window_count(iq.len(), start_offset, w, period);
    let mut out = Vec::with_capacity(count);
    let mut j = 0;
    while j < count {
        let batch = RX_BATCH.min(count - j);
        let mut data = Vec::with_capacity(batch * 2 * w);
        for b in j..j + batch {
            let s = start_offset + b * period;
            data.extend_from_slice(&iq.samples[2 * s..2 * (s + w)]);
        }
        out.extend(decoder.decide_batch(&TensorOf::new(vec![batch, 2 * w], data)?)?);
        j += batch;
    }
    Ok(out)
}

/// Index in the sent sequence of the data symbol fully contained in a window
/// starting at transmitted sample `pos` (the stream begins with a pilot).
/// Positions `q 2n + r` with `r <= n` see symbol `q`, larger `r` see `q + 1`.
pub fn symbol_at(pos: usize, n: usize) -> usize {
    let (q, r) = (pos / (2 * n), pos % (2 * n));
    if r <= n {
        q
    } else {
        q + 1
    }
}

/// Result of [`align_sequences`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    /// `decoded[i]` is compared with `sent[i + lag]`.
    pub lag: i64,
    pub overlap: usize,
    pub errors: usize,
    pub ser: f64,
}

/// Picks the lag in `[-max_lag, max_lag]` with the most matching symbols;
/// ties prefer the smallest `|lag|`, then the negative lag.
pub fn align_sequences(sent: &[usize], decoded: &[usize], max_lag: usize) -> Result<Alignment> {
    let mut best: Option<(usize, Alignment)> = None;
    let max_lag = max_lag as i64;
    let mut lags: Vec<i64> = (-max_lag..=max_lag).collect();
    lags.sort_by_key(|&l| (l.abs(), l > 0));
    for lag in lags {
        let lo = (-lag).max(0) as usize;
        let hi = (decoded.len() as i64).min(sent.len() as i64 - lag);
        if hi <= lo as i64 {
            continue;
        }
        let hi = hi as usize;
        let matches = (lo..hi)
            .filter(|&i| decoded[i] == sent[(i as i64 + lag) as usize])
            .count();
        let overlap = hi - lo;
        if best.as_ref().is_none_or(|(m, _)| matches > *m) {
            let errors = overlap - matches;
            best = Some((
                matches,
                Alignment {
                    lag,
                    overlap,
                    errors,
                    ser: errors as f64 / overlap as f64,
                },
            ));
        }
    }
    best.map(|(_, a)| a)
        .ok_or_else(|| Error::Domain("sequences do not overlap at any admissible lag".into()))
}

/// `decoded[i]` compared with `sent[i + lag]`, SER per block of `window_symbols`
/// decoded symbols over the overlap. A trailing partial block is kept.
pub fn windowed_ser(sent: &[usize], decoded: &[usize], lag: i64, window_symbols: usize) -> Result<Vec<f64>> {
    if window_symbols == 0 {
        return Err(Error::Config("window_symbols must be at least 1".into()));
    }
    let lo = (-lag).max(0) as usize;
    let hi = (decoded.len() as i64).min(sent.len() as i64 - lag).max(lo as i64) as usize;
    let idx: Vec<usize> = (lo..hi).collect();
    Ok(idx
        .chunks(window_symbols)
        .map(|chunk| {
            let errs = chunk
                .iter()
                .filter(|&&i| decoded[i] != sent[(i as i64 + lag) as usize])
                .count();
            errs as f64 / chunk.len() as f64
        })
        .collect())
}

/// Biased sample autocorrelation of the mean-removed series, normalised so
/// lag 0 is 1. A constant series yields all zeros.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Vec<f64> {
    let n = series.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let var: f64 = d.iter().map(|v| v * v).sum();
    (0..=max_lag.min(n - 1))
        .map(|lag| {
            if var == 0.0 {
                0.0
            } else {
                d[..n - lag].iter().zip(&d[lag..]).map(|(a, b)| a * b).sum::<f64>() / var
            }
        })
        .collect()
}

/// Peaks within this fraction of the highest one count as candidates for the
/// fundamental period, so a harmonic that wins by noise is not reported.
const PEAK_FRACTION: f64 = 0.8;

/// Fundamental period of the series: the smallest lag among the positive local
/// maxima of the autocorrelation (lags `1..=len/2`) that reach
/// [`PEAK_FRACTION`] of the highest one.
pub fn dominant_period(series: &[f64]) -> Option<usize> {
    let acf = autocorrelation(series, series.len() / 2 + 1);
    let peaks: Vec<(usize, f64)> = (1..acf.len().saturating_sub(1))
        .filter(|&lag| acf[lag] > acf[lag - 1] && acf[lag] >= acf[lag + 1] && acf[lag] > 0.0)
        .map(|lag| (lag, acf[lag]))
        .collect();
    let top = peaks.iter().map(|p| p.1).fold(0.0, f64::max);
    peaks.iter().find(|p| p.1 >= PEAK_FRACTION * top).map(|p| p.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Throughput {
    pub windows: usize,
    pub bits: u64,
    pub elapsed: Duration,
    pub bits_per_second: f64,
}

/// Wall-clock decoding rate: repeats full passes over `iq` until at least
/// `min_duration` has elapsed (one pass minimum) and reports `k` bits per window.
pub fn measure_throughput<T: Real>(
    decoder: &DecoderNet<T>,
    iq: &IqStream<T>,
    min_duration: Duration,
) -> Result<Throughput> {
    let k = decoder.config().k as u64;
    let start = Instant::now();
    let mut windows = 0;
    loop {
        windows += rx_stream(decoder, iq, 0)?.len();
        if start.elapsed() >= min_duration {
            break;
        }
    }
    let elapsed = start.elapsed();
    let bits = k * windows as u64;
    Ok(Throughput {
        windows,
        bits,
        elapsed,
        bits_per_second: bits as f64 / elapsed.as_secs_f64().max(1e-12),
    })
}

/// Raw data rate at `sample_rate`: `k` bits per `2n` samples.
pub fn raw_bit_rate(k: usize, n: usize, sample_rate: f64) -> f64 {
    sample_rate * k as f64 / (2 * n) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_count_formula() {
        assert_eq!(window_count(16_000, 8, 23, 16), (16_000 - 8 - 23) / 16 + 1);
        assert_eq!(window_count(22, 0, 23, 16), 0);
        assert_eq!(window_count(23, 0, 23, 16), 1);
    }

    #[test]
    fn symbol_position_mapping() {
        // n = 8: offsets 0..=8 see the first data symbol, 9..=15 the second.
        assert_eq!(symbol_at(0, 8), 0);
        assert_eq!(symbol_at(8, 8), 0);
        assert_eq!(symbol_at(9, 8), 1);
        assert_eq!(symbol_at(16, 8), 1);
        assert_eq!(symbol_at(40, 8), 2);
    }

    #[test]
    fn alignment_examples() {
        let sent: Vec<usize> = (0..50).map(|i| (i * 37) % 256).collect();
        let a = align_sequences(&sent, &sent, 4).unwrap();
        assert_eq!((a.lag, a.errors), (0, 0));
        let a = align_sequences(&sent, &sent[1..], 4).unwrap();
        assert_eq!((a.lag, a.ser), (1, 0.0));
        let shifted: Vec<usize> = std::iter::once(99).chain(sent.iter().copied()).collect();
        assert_eq!(align_sequences(&sent, &shifted, 4).unwrap().lag, -1);
        assert!(align_sequences(&[], &sent, 3).is_err());
    }

    #[test]
    fn alignment_tie_break() {
        // Constant sequences match equally at every lag.
        let a = align_sequences(&[5; 10], &[5; 10], 3).unwrap();
        assert_eq!(a.lag, 0);
        let a = align_sequences(&[1, 2, 1, 2, 1, 2], &[2, 1, 2, 1, 2, 1], 1).unwrap();
        assert_eq!(a.lag, -1);
    }

    #[test]
    fn windowed_series() {
        let sent: Vec<usize> = (0..100).collect();
        assert!(windowed_ser(&sent, &sent, 0, 10).unwrap().iter().all(|&v| v == 0.0));
        let mut dec = sent.clone();
        dec[13] = 0;
        let s = windowed_ser(&sent, &dec, 0, 25).unwrap();
        assert_eq!(s, vec![0.04, 0.0, 0.0, 0.0]);
        assert!(windowed_ser(&sent, &dec, 0, 0).is_err());
    }

    #[test]
    fn periodic_series_has_its_period() {
        let s: Vec<f64> = (0..400).map(|i| (i as f64 * std::f64::consts::TAU / 20.0).sin() + 0.01 * ((i * 7919) % 13) as f64).collect();
        assert_eq!(dominant_period(&s), Some(20));
        assert_eq!(dominant_period(&[0.5; 50]), None);
        // A pulse train of period 10 whose second repeat is stronger: still 10.
        let t: Vec<f64> = (0..300).map(|i| if i % 10 == 0 { if i % 20 == 0 { 1.2 } else { 1.0 } } else { 0.0 }).collect();
        assert_eq!(dominant_period(&t), Some(10));
        let acf = autocorrelation(&s, 5);
        assert!((acf[0] - 1.0).abs() < 1e-12 && acf.len() == 6);
    }

    #[test]
    fn raw_rate_of_ae_8_8_at_1mhz() {
        assert_eq!(raw_bit_rate(8, 8, 1e6), 0.5e6);
    }
}
