use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel length of the first synchronization-feature convolution.
pub const SFE_KERNEL_1: usize = 3;
/// Kernel length of the second synchronization-feature convolution.
pub const SFE_KERNEL_2: usize = 16;
pub const SFE_CHANNELS_1: usize = 128;
pub const SFE_CHANNELS_2: usize = 64;
/// Pool sizes after the two convolutions; the first is the identity.
pub const SFE_POOL_1: usize = 1;
pub const SFE_POOL_2: usize = 2;
pub const SFE_HIDDEN: usize = 512;
/// Width of the synchronization feature vector concatenated to the window.
pub const SFE_FEATURES: usize = 10;
/// Hidden widths of the decoder trunk, before the `M`-way output layer.
pub const TRUNK_WIDTHS: [usize; 5] = [512, 512, 256, 256, 128];
/// The pilot is always symbol 0.
pub const PILOT_SYMBOL: usize = 0;

/// An autoencoder variant `AE-k/n` (suffix `-2` without the feature estimator).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Bits per symbol.
    pub k: usize,
    /// Complex samples per symbol.
    pub n: usize,
    pub sfe_enabled: bool,
}

impl ModelConfig {
    pub fn new(k: usize, n: usize, sfe_enabled: bool) -> Result<Self> {
        let cfg = Self { k, n, sfe_enabled };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn ae_7_16() -> Self {
        Self { k: 7, n: 16, sfe_enabled: true }
    }

    pub fn ae_8_8() -> Self {
        Self { k: 8, n: 8, sfe_enabled: true }
    }

    pub fn ae_7_8() -> Self {
        Self { k: 7, n: 8, sfe_enabled: true }
    }

    pub fn ae_8_8_2() -> Self {
        Self { k: 8, n: 8, sfe_enabled: false }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=16).contains(&self.k) {
            return Err(Error::Config(format!("k = {} must be in 1..=16", self.k)));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if self.sfe_enabled && self.window() < SFE_KERNEL_2 + SFE_KERNEL_1 - 1 + SFE_POOL_2 - 1 {
            return Err(Error::Config(format!(
                "window W = {} too short for the feature estimator (needs W >= 19, i.e. n >= 7)",
                self.window()
            )));
        }
        Ok(())
    }

    /// Number of symbols, `2^k`.
    pub fn m(&self) -> usize {
        1 << self.k
    }

    /// Receiver window, `3n - 1` samples.
    pub fn window(&self) -> usize {
        3 * self.n - 1
    }

    /// Serialized frame length during training, `5n` samples.
    pub fn frame_len(&self) -> usize {
        5 * self.n
    }

    /// Stream samples per data symbol (data plus pilot).
    pub fn stream_period(&self) -> usize {
        2 * self.n
    }

    /// Conv output lengths and flatten width of the feature estimator.
    pub fn sfe_dims(&self) -> (usize, usize, usize, usize) {
        let conv1 = self.window() - SFE_KERNEL_1 + 1;
        let pool1 = conv1 / SFE_POOL_1;
        let conv2 = pool1 - SFE_KERNEL_2 + 1;
        let pool2 = conv2 / SFE_POOL_2;
        (conv1, conv2, pool2, pool2 * SFE_CHANNELS_2)
    }

    /// Decoder trunk input width: `2W`, plus the features when enabled.
    pub fn concat_width(&self) -> usize {
        2 * self.window() + if self.sfe_enabled { SFE_FEATURES } else { 0 }
    }

    pub fn name(&self) -> String {
        format!(
            "AE-{}/{}{}",
            self.k,
            self.n,
            if self.sfe_enabled { "" } else { "-2" }
        )
    }

    /// Parses names such as `AE-7/16` or `AE-8/8-2`.
    pub fn from_name(name: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unrecognised model name {name:?}"));
        let rest = name.strip_prefix("AE-").ok_or_else(bad)?;
        let (rest, sfe) = match rest.strip_suffix("-2") {
            Some(r) => (r, false),
            None => (rest, true),
        };
        let (k, n) = rest.split_once('/').ok_or_else(bad)?;
        Self::new(k.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?, sfe)
    }

    /// File-system friendly name: `AE-8/8` becomes `AE-8_8`.
    pub fn file_stem(&self) -> String {
        self.name().replace('/', "_")
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}
