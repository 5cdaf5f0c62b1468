//! Content-addressed store of trained models. Training is deterministic, so a
//! bundle is keyed by a digest of its complete training configuration.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{WeightBundle, FORMAT_VERSION};
use crate::trainer::{TrainConfig, TrainLog, Trainer};

/// Digest of everything that determines a training run's output.
pub fn config_key(config: &TrainConfig) -> Result<String> {
    let json = serde_json::to_string(config).map_err(|e| Error::format("train config", e.to_string()))?;
    let mut h = Sha256::new();
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    h.update(FORMAT_VERSION.to_le_bytes());
    h.update(json.as_bytes());
    Ok(hex::encode(&h.finalize()[..8]))
}

pub fn cache_paths(dir: &Path, config: &TrainConfig) -> Result<(PathBuf, PathBuf)> {
    let stem = format!("{}-s{}-{}", config.model.file_stem(), config.seed, config_key(config)?);
    Ok((dir.join(format!("{stem}.weights")), dir.join(format!("{stem}.log.json"))))
}

/// Loads the cached result of `config` or trains and stores it.
pub fn train_cached(config: &TrainConfig, dir: &Path) -> Result<(WeightBundle<f32>, TrainLog)> {
    let (weights, log) = cache_paths(dir, config)?;
    if weights.exists() && log.exists() {
        let bundle = WeightBundle::load(&weights)?;
        let log: TrainLog = serde_json::from_str(&fs::read_to_string(&log)?)
            .map_err(|e| Error::format("cached train log", e.to_string()))?;
        return Ok((bundle, log));
    }
    let mut trainer = Trainer::<f32>::new(*config)?;
    trainer.run(|_| Ok(()))?;
    fs::create_dir_all(dir)?;
    let bundle = trainer.bundle();
    // Write to temporaries first so an interrupted run leaves no partial entry.
    let tmp_w = weights.with_extension("weights.tmp");
    bundle.save(&tmp_w)?;
    let tmp_l = log.with_extension("json.tmp");
    fs::write(&tmp_l, serde_json::to_string(&trainer.log).map_err(|e| Error::format("train log", e.to_string()))?)?;
    fs::rename(tmp_l, &log)?;
    fs::rename(tmp_w, &weights)?;
    Ok((bundle, trainer.log))
}
