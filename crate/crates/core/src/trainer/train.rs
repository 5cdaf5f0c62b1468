//! Training loop with logging, divergence detection and resumable checkpoints.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::step::{forward_backward, sample_training_batch};
use crate::channel::{ChannelParams, RngStream};
use crate::diffnet::{AdamConfig, OptimizerState};
use crate::error::{Error, Result};
use crate::model::{Autoencoder, ModelConfig, TrainingMetadata, WeightBundle};
use crate::scalar::Real;

/// Steps after which sustained high loss counts as divergence.
pub const DIVERGENCE_GRACE_STEPS: u64 = 10_000;
/// Consecutive steps above `ln M + 2` that signal divergence.
pub const DIVERGENCE_WINDOW: u64 = 1_000;
/// Margin above the uniform-guess loss `ln M`.
pub const DIVERGENCE_MARGIN: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub channel: ChannelParams,
    pub batch_size: usize,
    pub total_steps: u64,
    pub optimizer: AdamConfig,
    pub seed: u64,
    /// Steps between checkpoints; 0 disables them.
    pub checkpoint_interval: u64,
    /// Steps aggregated into one log record.
    pub log_interval: u64,
}

impl TrainConfig {
    /// Default schedule: batch 64, 150k steps (200k for `n = 16`), training at
    /// 5 dB per sample on the full random channel.
    pub fn default_for(model: ModelConfig) -> Self {
        Self {
            model,
            channel: ChannelParams::default(),
            batch_size: 64,
            total_steps: if model.n >= 16 { 200_000 } else { 150_000 },
            optimizer: AdamConfig::default(),
            seed: 1,
            checkpoint_interval: 0,
            log_interval: 1_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.channel.validate()?;
        if self.total_steps == 0 {
            return Err(Error::Config("total_steps must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.log_interval == 0 {
            return Err(Error::Config("log_interval must be at least 1".into()));
        }
        let o = self.optimizer;
        if !(o.learning_rate > 0.0 && (0.0..1.0).contains(&o.beta1) && (0.0..1.0).contains(&o.beta2) && o.epsilon > 0.0) {
            return Err(Error::Config(format!("invalid optimizer settings {o:?}")));
        }
        Ok(())
    }
}

/// Aggregate over one logging interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    /// Last step of the interval (1-based count of completed steps).
    pub step: u64,
    pub mean_loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
}


/// Weights plus optimizer moments at a step boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Checkpoint<T> {
    pub step: u64,
    pub config: TrainConfig,
    pub optimizer_step: u64,
    pub first: Vec<Vec<T>>,
    pub second: Vec<Vec<T>>,
    pub bundle_json: String,
}

impl<T: Real> Checkpoint<T> {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::format("checkpoint", e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        serde_json::from_str(&fs::read_to_string(path)?).map_err(|e| Error::format("checkpoint", e.to_string()))
    }
}

/// Stream key for the per-step generator.
const STEP_STREAM: u64 = 0x57E9;

/// Stateful trainer. Step `i` draws its batch and channel from a generator
/// derived from `(seed, i)` alone, so resuming from a checkpoint replays the
/// same trajectory.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub config: TrainConfig,
    pub model: Autoencoder<T>,
    pub optimizer: OptimizerState<T>,
    pub step: u64,
    pub log: TrainLog,
    high_loss_run: u64,
    pending: (f64, f64, u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub loss: f64,
    pub accuracy: f64,
}

impl<T: Real> Trainer<T> {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let model = Autoencoder::new(config.model, config.seed)?;
        let optimizer = OptimizerState::new(config.optimizer, &model.params());
        Ok(Self {
            config,
            model,
            optimizer,
            step: 0,
            log: TrainLog::default(),
            high_loss_run: 0,
            pending: (0.0, 0.0, 0),
        })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint<T>) -> Result<Self> {
        ckpt.config.validate()?;
        let bundle = WeightBundle::<T>::from_json(&ckpt.bundle_json)?;
        let model = bundle.to_model()?;
        let mut optimizer = OptimizerState::new(ckpt.config.optimizer, &model.params());
        if optimizer.first.len() != ckpt.first.len()
            || optimizer.first.iter().zip(&ckpt.first).any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::format("checkpoint", "optimizer moments do not match the model"));
        }
        optimizer.step = ckpt.optimizer_step;
        optimizer.first = ckpt.first.clone();
        optimizer.second = ckpt.second.clone();
        Ok(Self {
            config: ckpt.config,
            model,
            optimizer,
            step: ckpt.step,
            log: TrainLog::default(),
            high_loss_run: 0,
            pending: (0.0, 0.0, 0),
        })
    }

    pub fn checkpoint(&self) -> Result<Checkpoint<T>> {
        Ok(Checkpoint {
            step: self.step,
            config: self.config,
            optimizer_step: self.optimizer.step,
            first: self.optimizer.first.clone(),
            second: self.optimizer.second.clone(),
            bundle_json: self.bundle().to_json()?,
        })
    }

    pub fn metadata(&self) -> TrainingMetadata {
        TrainingMetadata {
            seed: self.config.seed,
            steps: self.step,
            train_es_n0_db: Some(self.config.channel.es_n0_db),
        }
    }

    pub fn bundle(&self) -> WeightBundle<T> {
        WeightBundle::from_model(&self.model, self.metadata())
    }

    /// One optimizer update over a fresh batch.
    pub fn training_step(&mut self) -> Result<StepStats> {
        crate::scalar::flush_subnormals();
        let mut rng = RngStream::keyed(self.config.seed ^ STEP_STREAM, self.step);
        let cfg = self.config;
        let batch = sample_training_batch(&mut rng, cfg.model.m(), cfg.batch_size);
        let out = forward_backward(&self.model, &batch, &cfg.channel, &mut rng)?;
        self.optimizer.step(&mut self.model.params_mut(), &out.grads)?;
        self.step += 1;

        let stats = StepStats {
            loss: out.loss.as_f64(),
            accuracy: out.accuracy,
        };
        self.pending.0 += stats.loss;
        self.pending.1 += stats.accuracy;
        self.pending.2 += 1;
        if self.step.is_multiple_of(cfg.log_interval) || self.step == cfg.total_steps {
            let (l, a, c) = self.pending;
            self.log.records.push(LogRecord {
                step: self.step,
                mean_loss: l / c as f64,
                accuracy: a / c as f64,
            });
            self.pending = (0.0, 0.0, 0);
        }

        let threshold = (cfg.model.m() as f64).ln() + DIVERGENCE_MARGIN;
        if self.step > DIVERGENCE_GRACE_STEPS && stats.loss > threshold {
            self.high_loss_run += 1;
            if self.high_loss_run >= DIVERGENCE_WINDOW {
                return Err(Error::Diverged {
                    step: self.step,
                    loss: stats.loss,
                    threshold,
                });
            }
        } else {
            self.high_loss_run = 0;
        }
        Ok(stats)
    }

    /// Runs to `total_steps`, calling `on_checkpoint` every `checkpoint_interval` steps.
    pub fn run(&mut self, mut on_checkpoint: impl FnMut(&Self) -> Result<()>) -> Result<()> {
        while self.step < self.config.total_steps {
            self.training_step()?;
            let every = self.config.checkpoint_interval;
            if every > 0 && self.step.is_multiple_of(every) {
                on_checkpoint(self)?;
            }
        }
        Ok(())
    }
}

/// Trains a fresh model to completion.
pub fn train<T: Real>(config: TrainConfig) -> Result<(WeightBundle<T>, TrainLog)> {
    let mut trainer = Trainer::<T>::new(config)?;
    trainer.run(|_| Ok(()))?;
    Ok((trainer.bundle(), trainer.log))
}
