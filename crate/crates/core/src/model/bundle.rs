//! Weight bundle: a JSON manifest holding the model configuration, training
//! metadata and every parameter tensor as a flat row-major array.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Autoencoder, ModelConfig};
use crate::diffnet::TensorOf;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub steps: u64,
    /// `null` for untrained bundles.
    pub train_es_n0_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LayerRecord<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<T>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ConfigRecord {
    k: usize,
    n: usize,
    sfe_enabled: bool,
    name: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct Manifest<T> {
    format_version: u32,
    config: ConfigRecord,
    metadata: TrainingMetadata,
    layers: Vec<LayerRecord<T>>,
}

/// Weights plus training metadata, as exchanged between trainer and runtime.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightBundle<T> {
    pub config: ModelConfig,
    pub metadata: TrainingMetadata,
    pub layers: Vec<LayerRecord<T>>,
}

impl<T: Real> WeightBundle<T> {
    pub fn from_model(model: &Autoencoder<T>, metadata: TrainingMetadata) -> Self {
        let layers = model
            .named_params()
            .into_iter()
            .map(|(name, p)| LayerRecord {
                name,
                shape: p.shape().to_vec(),
                values: p.data().to_vec(),
            })
            .collect();
        Self {
            config: model.config(),
            metadata,
            layers,
        }
    }

    /// Rebuilds the networks, checking every record against the architecture.
    pub fn to_model(&self) -> Result<Autoencoder<T>> {
        let mut model = Autoencoder::new(self.config, 0)?;
        let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
        if names.len() != self.layers.len() {
            return Err(Error::format(
                "layers",
                format!("{} records, architecture has {} tensors", self.layers.len(), names.len()),
            ));
        }
        for ((name, param), rec) in names.iter().zip(model.params_mut()).zip(&self.layers) {
            if &rec.name != name {
                return Err(Error::format(&rec.name, format!("expected layer {name}")));
            }
            if rec.shape != param.shape() {
                return Err(Error::format(
                    &rec.name,
                    format!("shape {:?}, architecture needs {:?}", rec.shape, param.shape()),
                ));
            }
            if rec.values.len() != param.len() {
                return Err(Error::format(
                    &rec.name,
                    format!("{} values for shape {:?}", rec.values.len(), rec.shape),
                ));
            }
            if rec.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::format(&rec.name, "non-finite value"));
            }
            *param = TensorOf::new(rec.shape.clone(), rec.values.clone())?;
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            config: ConfigRecord {
                k: self.config.k,
                n: self.config.n,
                sfe_enabled: self.config.sfe_enabled,
                name: self.config.name(),
            },
            metadata: self.metadata,
            layers: self.layers.clone(),
        };
        serde_json::to_string(&manifest).map_err(|e| Error::format("bundle", e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Manifest<T> =
            serde_json::from_str(text).map_err(|e| Error::format("bundle", e.to_string()))?;
        if m.format_version != FORMAT_VERSION {
            return Err(Error::format(
                "format_version",
                format!("unsupported version {}", m.format_version),
            ));
        }
        let config = ModelConfig::new(m.config.k, m.config.n, m.config.sfe_enabled)
            .map_err(|e| Error::format("config", e.to_string()))?;
        if config.name() != m.config.name {
            return Err(Error::format(
                "config.name",
                format!("{:?} does not match {}", m.config.name, config.name()),
            ));
        }
        let bundle = Self {
            config,
            metadata: m.metadata,
            layers: m.layers,
        };
        bundle.to_model()?;
        Ok(bundle)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Saves a model with its metadata.
pub fn save_weights<T: Real>(
    model: &Autoencoder<T>,
    metadata: TrainingMetadata,
    path: impl AsRef<Path>,
) -> Result<()> {
    WeightBundle::from_model(model, metadata).save(path)
}

pub fn load_weights<T: Real>(path: impl AsRef<Path>) -> Result<WeightBundle<T>> {
    WeightBundle::load(path)
}
