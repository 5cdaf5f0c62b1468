//! Training-time channel: constant phase rotation, attenuation, AWGN and a
//! receiver window shifted by an integer offset. Every step has an adjoint so
//! gradients flow from the decoder input back to the encoder output.
//!
//! Complex sequences are interleaved `(re, im)` pairs.

use serde::{Deserialize, Serialize};

use super::rng::RngStream;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Order in which attenuation and receiver noise are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImpairmentOrder {
    /// `y = a (e^{-j phi} x + r)`: the attenuation does not change the SNR.
    #[default]
    NoiseThenAttenuate,
    /// `y = a e^{-j phi} x + r`: the attenuation lowers the effective SNR by `a^2`.
    AttenuateThenNoise,
}

/// Distribution of the training/evaluation channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    /// SNR per complex sample in dB; `+inf` disables noise.
    pub es_n0_db: f64,
    /// Attenuation is drawn uniformly from `[a_min, a_max]`.
    pub a_min: f64,
    #[serde(default = "unit")]
    pub a_max: f64,
    /// Phase uniform on `[0, 2 pi)` when set, otherwise 0.
    pub random_phase: bool,
    /// Window offset uniform on `{-n+1, ..., n}` when set, otherwise 0.
    pub random_offset: bool,
    #[serde(default)]
    pub order: ImpairmentOrder,
}

fn unit() -> f64 {
    1.0
}

/// Training SNR per sample.
pub const DEFAULT_TRAIN_ES_N0_DB: f64 = 5.0;
/// Smallest attenuation of the evaluation channel.
pub const DEFAULT_A_MIN: f64 = 0.01;

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            es_n0_db: DEFAULT_TRAIN_ES_N0_DB,
            a_min: DEFAULT_A_MIN,
            a_max: 1.0,
            random_phase: true,
            random_offset: true,
            order: ImpairmentOrder::default(),
        }
    }
}

impl ChannelParams {
    /// No noise, unit attenuation, zero phase and zero offset.
    pub fn clean() -> Self {
        Self {
            es_n0_db: f64::INFINITY,
            a_min: 1.0,
            a_max: 1.0,
            random_phase: false,
            random_offset: false,
            order: ImpairmentOrder::default(),
        }
    }

    pub fn with_es_n0_db(mut self, es_n0_db: f64) -> Self {
        self.es_n0_db = es_n0_db;
        self
    }

    /// Same channel with the attenuation pinned to `a`.
    pub fn with_attenuation(mut self, a: f64) -> Self {
        self.a_min = a;
        self.a_max = a;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a_min > 0.0 && self.a_min <= self.a_max && self.a_max <= 1.0) {
            return Err(Error::Config(format!(
                "attenuation range [{}, {}] must satisfy 0 < a_min <= a_max <= 1",
                self.a_min, self.a_max
            )));
        }
        if self.es_n0_db.is_nan() || self.es_n0_db == f64::NEG_INFINITY {
            return Err(Error::Config(format!("es_n0_db = {} is not usable", self.es_n0_db)));
        }
        Ok(())
    }

    /// Draws the per-frame random quantities for symbol length `n`.
    pub fn draw(&self, n: usize, rng: &mut RngStream) -> ChannelDraws {
        let u_phase = rng.uniform();
        let u_amp = rng.uniform();
        let offset = rng.below(2 * n as u64) as i64 - (n as i64 - 1);
        ChannelDraws {
            phase: if self.random_phase { std::f64::consts::TAU * u_phase } else { 0.0 },
            attenuation: self.a_min + (self.a_max - self.a_min) * u_amp,
            offset: if self.random_offset { offset } else { 0 },
        }
    }
}

/// Random quantities of one channel pass; constants for differentiation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDraws {
    pub phase: f64,
    pub attenuation: f64,
    pub offset: i64,
}

/// Noise variance `N_0 = 10^(-es_n0_db / 10)` relative to unit sample energy.
pub fn noise_variance(es_n0_db: f64) -> f64 {
    if es_n0_db == f64::INFINITY {
        0.0
    } else {
        10f64.powf(-es_n0_db / 10.0)
    }
}

fn check_pairs<T>(x: &[T]) -> Result<()> {
    if !x.len().is_multiple_of(2) {
        return Err(Error::Shape(format!("odd interleaved length {}", x.len())));
    }
    Ok(())
}

/// Multiplies every sample by `e^{-j phi}`.
pub fn phase_rotate<T: Real>(x: &[T], phi: f64) -> Result<Vec<T>> {
    check_pairs(x)?;
    let (s, c) = phi.sin_cos();
    let (s, c) = (T::of(s), T::of(c));
    let mut out = Vec::with_capacity(x.len());
    for z in x.chunks_exact(2) {
        out.push(z[0] * c + z[1] * s);
        out.push(z[1] * c - z[0] * s);
    }
    Ok(out)
}

/// Scales every sample by `a`, which must lie in `(0, 1]`.
pub fn attenuate<T: Real>(x: &[T], a: f64) -> Result<Vec<T>> {
    check_pairs(x)?;
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::Domain(format!("attenuation {a} outside (0, 1]")));
    }
    let a = T::of(a);
    Ok(x.iter().map(|&v| v * a).collect())
}

/// Adds complex Gaussian noise with variance `N_0 / 2` per real component.
pub fn add_awgn<T: Real>(x: &[T], es_n0_db: f64, rng: &mut RngStream) -> Result<Vec<T>> {
    check_pairs(x)?;
    let sigma = (noise_variance(es_n0_db) / 2.0).sqrt();
    if sigma == 0.0 {
        return Ok(x.to_vec());
    }
    Ok(x.iter().map(|&v| v + T::of(sigma * rng.normal())).collect())
}

/// Receiver window length `3n - 1`.
pub fn window_len(n: usize) -> usize {
    3 * n - 1
}

/// First frame sample of the window at offset `m`; `m = 0` starts at the first pilot.
pub fn window_start(n: usize, m: i64) -> Result<usize> {
    let n_i = n as i64;
    if m < -n_i + 1 || m > n_i {
        return Err(Error::Domain(format!("offset {m} outside {}..={n}", 1 - n_i)));
    }
    Ok((n_i + m) as usize)
}

/// Cuts the `3n - 1` sample window at offset `m` out of a `5n` sample frame.
pub fn extract_window<T: Real>(frame: &[T], n: usize, m: i64) -> Result<Vec<T>> {
    if frame.len() != 10 * n {
        return Err(Error::Shape(format!(
            "frame has {} samples, expected {}",
            frame.len() / 2,
            5 * n
        )));
    }
    let start = window_start(n, m)?;
    Ok(frame[2 * start..2 * (start + window_len(n))].to_vec())
}

/// Applies phase, attenuation and noise (in `params.order`) with fixed `draws`,
/// then extracts the window.
pub fn channel_apply<T: Real>(
    frame: &[T],
    n: usize,
    params: &ChannelParams,
    draws: &ChannelDraws,
    rng: &mut RngStream,
) -> Result<Vec<T>> {
    let u = phase_rotate(frame, draws.phase)?;
    let y = match params.order {
        ImpairmentOrder::AttenuateThenNoise => add_awgn(&attenuate(&u, draws.attenuation)?, params.es_n0_db, rng)?,
        ImpairmentOrder::NoiseThenAttenuate => attenuate(&add_awgn(&u, params.es_n0_db, rng)?, draws.attenuation)?,
    };
    extract_window(&y, n, draws.offset)
}

/// Full random channel pass over one `5n` sample frame.
pub fn channel_pass<T: Real>(
    frame: &[T],
    n: usize,
    params: &ChannelParams,
    rng: &mut RngStream,
) -> Result<(Vec<T>, ChannelDraws)> {
    let draws = params.draw(n, rng);
    let window = channel_apply(frame, n, params, &draws, rng)?;
    Ok((window, draws))
}

/// Adjoint of [`channel_apply`]: maps a window gradient to a frame gradient.
pub fn channel_backward<T: Real>(grad_window: &[T], n: usize, draws: &ChannelDraws) -> Result<Vec<T>> {
    let w = window_len(n);
    if grad_window.len() != 2 * w {
        return Err(Error::Shape(format!(
            "window gradient has {} samples, expected {w}",
            grad_window.len() / 2
        )));
    }
    let start = window_start(n, draws.offset)?;
    let a = T::of(draws.attenuation);
    let mut g = vec![T::zero(); 10 * n];
    for (d, s) in g[2 * start..2 * (start + w)].iter_mut().zip(grad_window) {
        *d = *s * a;
    }
    // The adjoint of a rotation by -phi is a rotation by +phi.
    phase_rotate(&g, -draws.phase)
}

/// SNR per bit from SNR per sample: `eb = es + 10 log10(n / k)`.
pub fn es_to_eb(es_n0_db: f64, k: usize, n: usize) -> f64 {
    es_n0_db + 10.0 * (n as f64 / k as f64).log10()
}

pub fn eb_to_es(eb_n0_db: f64, k: usize, n: usize) -> f64 {
    eb_n0_db - 10.0 * (n as f64 / k as f64).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rotation_by_pi_negates() {
        let y = phase_rotate(&[1.0f64, 0.0], PI).unwrap();
        assert!((y[0] + 1.0).abs() < 1e-12 && y[1].abs() < 1e-12);
        assert_eq!(phase_rotate(&[0.3f32, -0.7], 0.0).unwrap(), vec![0.3, -0.7]);
    }

    #[test]
    fn rotation_convention_is_minus_j_phi() {
        // e^{-j pi/2} * 1 = -j
        let y = phase_rotate(&[1.0f64, 0.0], PI / 2.0).unwrap();
        assert!(y[0].abs() < 1e-12 && (y[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn attenuation_bounds() {
        assert!(attenuate(&[1.0f32, 0.0], 0.0).is_err());
        assert!(attenuate(&[1.0f32, 0.0], 1.5).is_err());
        let v = attenuate(&[1.0f64, 0.0], 0.01).unwrap();
        assert!((v[0].hypot(v[1]) - 0.01).abs() < 1e-12);
        assert_eq!(attenuate(&[0.25f32, 0.5], 1.0).unwrap(), vec![0.25, 0.5]);
    }

    #[test]
    fn noise_variance_values() {
        assert_eq!(noise_variance(0.0), 1.0);
        assert!((noise_variance(5.0) - 0.316_227_766).abs() < 1e-9);
        assert_eq!(noise_variance(f64::INFINITY), 0.0);
        let x = [0.5f32, -0.5, 0.1, 0.2];
        let mut rng = RngStream::new(1);
        assert_eq!(add_awgn(&x, f64::INFINITY, &mut rng).unwrap(), x.to_vec());
        assert_eq!(rng.position(), 0);
    }

    #[test]
    fn window_examples() {
        let frame: Vec<f64> = (0..80).flat_map(|i| [i as f64, 0.0]).collect();
        let w = extract_window(&frame, 16, 0).unwrap();
        assert_eq!(w.len(), 2 * 47);
        assert_eq!((w[0], w[92]), (16.0, 62.0));

        let frame: Vec<f64> = (0..40).flat_map(|i| [i as f64, 0.0]).collect();
        let w = extract_window(&frame, 8, -7).unwrap();
        assert_eq!((w[0], w[w.len() - 2]), (1.0, 23.0));
        let w = extract_window(&frame, 8, 8).unwrap();
        assert_eq!((w[0], w[w.len() - 2]), (16.0, 38.0));
        assert!(extract_window(&frame, 8, -8).is_err());
        assert!(extract_window(&frame, 8, 9).is_err());
    }

    #[test]
    fn snr_conversion() {
        assert_eq!(es_to_eb(3.0, 8, 8), 3.0);
        assert!((es_to_eb(5.0, 7, 16) - 8.590_219_4).abs() < 1e-6);
        for es in [-3.0, 0.0, 5.0, 14.2] {
            assert!((eb_to_es(es_to_eb(es, 7, 8), 7, 8) - es).abs() < 1e-9);
        }
    }

    #[test]
    fn clean_pass_is_a_frame_slice() {
        let frame: Vec<f32> = (0..80).map(|i| i as f32 * 0.01).collect();
        let mut rng = RngStream::new(5);
        let (w, d) = channel_pass(&frame, 8, &ChannelParams::clean(), &mut rng).unwrap();
        assert_eq!(d, ChannelDraws { phase: 0.0, attenuation: 1.0, offset: 0 });
        assert_eq!(w, extract_window(&frame, 8, 0).unwrap());
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = ChannelParams::default();
        p.a_min = 0.0;
        assert!(p.validate().is_err());
        p.a_min = 1.2;
        assert!(p.validate().is_err());
        assert!(ChannelParams::default().validate().is_ok());
    }
}
