//! Streaming channel for deployment-style runs: slowly walking phase, fixed or
//! walking attenuation, AWGN and transmitter/receiver clock drift realised as
//! periodic single-sample slips.

use serde::{Deserialize, Serialize};

use super::impair::{noise_variance, ImpairmentOrder};
use super::rng::RngStream;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamChannelParams {
    /// `+inf` disables noise.
    pub es_n0_db: f64,
    /// Initial (or fixed) attenuation in `(0, 1]`.
    pub attenuation: f64,
    /// Maximum per-sample attenuation change; 0 keeps it fixed.
    pub attenuation_walk: f64,
    /// Lower bound for the walking attenuation.
    pub attenuation_min: f64,
    /// Phase of the first sample, radians.
    pub initial_phase: f64,
    /// Maximum per-sample phase change, radians; the step is uniform in `[-w, w]`.
    pub phase_walk: f64,
    /// Receiver clock offset: positive values delete samples, negative values duplicate them.
    pub drift_ppm: f64,
    #[serde(default)]
    pub order: ImpairmentOrder,
}

impl Default for StreamChannelParams {
    fn default() -> Self {
        Self::clean()
    }
}

impl StreamChannelParams {
    pub fn clean() -> Self {
        Self {
            es_n0_db: f64::INFINITY,
            attenuation: 1.0,
            attenuation_walk: 0.0,
            attenuation_min: 0.01,
            initial_phase: 0.0,
            phase_walk: 0.0,
            drift_ppm: 0.0,
            order: ImpairmentOrder::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.attenuation > 0.0 && self.attenuation <= 1.0) {
            return Err(Error::Config(format!(
                "attenuation {} outside (0, 1]",
                self.attenuation
            )));
        }
        if !(self.attenuation_min > 0.0 && self.attenuation_min <= self.attenuation) {
            return Err(Error::Config("attenuation_min must lie in (0, attenuation]".into()));
        }
        for (name, v) in [
            ("attenuation_walk", self.attenuation_walk),
            ("phase_walk", self.phase_walk),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if !self.drift_ppm.is_finite() || self.drift_ppm.abs() > 1e6 {
            return Err(Error::Config(format!("drift_ppm = {} out of range", self.drift_ppm)));
        }
        if self.es_n0_db.is_nan() {
            return Err(Error::Config("es_n0_db is NaN".into()));
        }
        Ok(())
    }

    /// Samples between slips, `round(1e6 / |ppm|)`; `None` without drift.
    pub fn slip_period(&self) -> Option<usize> {
        if self.drift_ppm == 0.0 {
            None
        } else {
            Some(((1e6 / self.drift_ppm.abs()).round() as usize).max(1))
        }
    }
}

/// Applies clock slips to an interleaved stream: every `period`-th input
/// sample is deleted (`delete = true`) or emitted twice.
pub fn apply_slips<T: Real>(iq: &[T], period: usize, delete: bool) -> Vec<T> {
    let mut out = Vec::with_capacity(iq.len() + 2 * (iq.len() / (2 * period) + 1));
    for (i, z) in iq.chunks_exact(2).enumerate() {
        let slip = (i + 1) % period == 0;
        if slip && delete {
            continue;
        }
        out.extend_from_slice(z);
        if slip {
            out.extend_from_slice(z);
        }
    }
    out
}

/// Index of the transmitted sample that became received sample `j` under
/// [`apply_slips`]. A duplicated sample maps both copies to the same source.
pub fn slip_source_index(j: usize, period: usize, delete: bool) -> usize {
    if delete {
        if period == 1 {
            // Every sample is deleted; nothing is received.
            return usize::MAX;
        }
        (j / (period - 1)) * period + j % (period - 1)
    } else {
        (j / (period + 1)) * period + (j % (period + 1)).min(period - 1)
    }
}

/// Passes an interleaved IQ stream through the streaming channel.
pub fn stream_channel<T: Real>(
    iq: &[T],
    params: &StreamChannelParams,
    rng: &mut RngStream,
) -> Result<Vec<T>> {
    params.validate()?;
    if !iq.len().is_multiple_of(2) {
        return Err(Error::Shape(format!("odd interleaved length {}", iq.len())));
    }
    let slipped = match params.slip_period() {
        Some(period) => apply_slips(iq, period, params.drift_ppm > 0.0),
        None => iq.to_vec(),
    };
    let sigma = (noise_variance(params.es_n0_db) / 2.0).sqrt();
    let mut phase = params.initial_phase;
    let mut amp = params.attenuation;
    let mut out = Vec::with_capacity(slipped.len());
    for z in slipped.chunks_exact(2) {
        let (s, c) = phase.sin_cos();
        let (re, im) = (z[0].as_f64(), z[1].as_f64());
        let (mut yr, mut yi) = (re * c + im * s, im * c - re * s);
        let noise = |rng: &mut RngStream| {
            if sigma > 0.0 {
                (sigma * rng.normal(), sigma * rng.normal())
            } else {
                (0.0, 0.0)
            }
        };
        match params.order {
            ImpairmentOrder::AttenuateThenNoise => {
                let (nr, ni) = noise(rng);
                yr = amp * yr + nr;
                yi = amp * yi + ni;
            }
            ImpairmentOrder::NoiseThenAttenuate => {
                let (nr, ni) = noise(rng);
                yr = amp * (yr + nr);
                yi = amp * (yi + ni);
            }
        }
        out.push(T::of(yr));
        out.push(T::of(yi));
        if params.phase_walk > 0.0 {
            phase += rng.uniform_range(-params.phase_walk, params.phase_walk);
        }
        if params.attenuation_walk > 0.0 {
            amp += rng.uniform_range(-params.attenuation_walk, params.attenuation_walk);
            // Reflect back into [attenuation_min, 1].
            if amp > 1.0 {
                amp = 2.0 - amp;
            }
            if amp < params.attenuation_min {
                amp = 2.0 * params.attenuation_min - amp;
            }
            amp = amp.clamp(params.attenuation_min, 1.0);
        }
    }
    Ok(out)
}
