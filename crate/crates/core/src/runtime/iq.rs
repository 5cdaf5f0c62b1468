//! IQ recordings: raw little-endian `f32` pairs `(re, im)` without header,
//! plus a sidecar text manifest of `key = value` lines.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Complex baseband stream, interleaved `(re, im)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IqStream<T> {
    pub samples: Vec<T>,
    /// Nominal sample rate in samples per second (metadata only).
    pub sample_rate: f64,
}

/// Sample rate used when none is given: 1 MHz.
pub const DEFAULT_SAMPLE_RATE: f64 = 1e6;

impl<T: Real> IqStream<T> {
    pub fn new(samples: Vec<T>, sample_rate: f64) -> Result<Self> {
        if !samples.len().is_multiple_of(2) {
            return Err(Error::Shape(format!("odd interleaved length {}", samples.len())));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("IQ stream contains non-finite samples".into()));
        }
        Ok(Self { samples, sample_rate })
    }

    /// Number of complex samples.
    pub fn len(&self) -> usize {
        self.samples.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, i: usize) -> (T, T) {
        (self.samples[2 * i], self.samples[2 * i + 1])
    }
}

pub fn encode_iq<T: Real>(samples: &[T]) -> Vec<u8> {
    samples
        .iter()
        .flat_map(|v| (v.to_f32().unwrap_or(f32::NAN)).to_le_bytes())
        .collect()
}

pub fn decode_iq<T: Real>(bytes: &[u8]) -> Result<Vec<T>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::format(
            "iq",
            format!("{} bytes is not a whole number of complex f32 samples", bytes.len()),
        ));
    }
    bytes
        .chunks_exact(4)
        .map(|c| {
            let v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            if v.is_finite() {
                Ok(T::of(f64::from(v)))
            } else {
                Err(Error::format("iq", "non-finite sample"))
            }
        })
        .collect()
}

/// Path of the sidecar manifest belonging to `iq_path` (`<file>.meta`).
pub fn sidecar_path(iq_path: &Path) -> PathBuf {
    let mut p = iq_path.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

/// Writes the samples and a sidecar with `sample_rate`, `samples` and `extra` keys.
pub fn write_iq_file<T: Real>(
    path: impl AsRef<Path>,
    stream: &IqStream<T>,
    extra: &BTreeMap<String, String>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_iq(&stream.samples))?;
    let mut meta = extra.clone();
    meta.insert("sample_rate".into(), format!("{}", stream.sample_rate));
    meta.insert("samples".into(), stream.len().to_string());
    meta.insert("format".into(), "cf32_le".into());
    fs::write(sidecar_path(path), write_key_values(&meta))?;
    Ok(())
}

/// Reads samples; the sample rate comes from the sidecar when present.
pub fn read_iq_file<T: Real>(path: impl AsRef<Path>) -> Result<(IqStream<T>, BTreeMap<String, String>)> {
    let path = path.as_ref();
    let samples = decode_iq(&fs::read(path)?)?;
    let side = sidecar_path(path);
    let meta = if side.exists() {
        parse_key_values(&fs::read_to_string(side)?)?
    } else {
        BTreeMap::new()
    };
    let sample_rate = match meta.get("sample_rate") {
        Some(v) => v
            .parse()
            .map_err(|_| Error::format("sidecar", format!("bad sample_rate {v:?}")))?,
        None => DEFAULT_SAMPLE_RATE,
    };
    Ok((IqStream::new(samples, sample_rate)?, meta))
}

pub fn write_key_values(map: &BTreeMap<String, String>) -> String {
    map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format("sidecar", format!("line {}: expected key = value", i + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Writes one symbol index per line.
pub fn write_symbols(path: impl AsRef<Path>, symbols: &[usize]) -> Result<()> {
    let text: String = symbols.iter().map(|s| format!("{s}\n")).collect();
    fs::write(path, text)?;
    Ok(())
}

pub fn read_symbols(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.trim()
                .parse()
                .map_err(|_| Error::format("symbols", format!("line {}: {l:?}", i + 1)))
        })
        .collect()
}
