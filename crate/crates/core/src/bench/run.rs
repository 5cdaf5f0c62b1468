//! Dispatch of resolved commands, manifest writing and replay.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::commands::{self, EvalCommand, Outcome, ReportCommand, RxCommand, Status, StreamsimCommand, SweepCommand, TxCommand};
use super::config;
use super::manifest::{artifacts, now, RunManifest, MANIFEST_VERSION};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use toml::Table;
use crate::trainer::TrainConfig;
use crate::verify::GradcheckConfig;

/// A verb with its fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Train(TrainConfig),
    Sweep(SweepCommand),
    Eval(EvalCommand),
    Streamsim(StreamsimCommand),
    Gradcheck(GradcheckConfig),
    Report(ReportCommand),
    Tx(TxCommand),
    Rx(RxCommand),
}

fn toml_text<T: Serialize>(v: &T) -> Result<String> {
    toml::to_string(v).map_err(|e| Error::Config(e.to_string()))
}

fn parse<T: DeserializeOwned>(text: &str, ctx: &str) -> Result<T> {
    config::from_table(config::parse_table(text, ctx)?, ctx)
}

impl Command {
    pub const NAMES: [&'static str; 8] = ["train", "sweep", "eval", "streamsim", "gradcheck", "report", "tx", "rx"];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::Sweep(_) => "sweep",
            Command::Eval(_) => "eval",
            Command::Streamsim(_) => "streamsim",
            Command::Gradcheck(_) => "gradcheck",
            Command::Report(_) => "report",
            Command::Tx(_) => "tx",
            Command::Rx(_) => "rx",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Command::Train(c) => c.seed,
            Command::Sweep(c) => c.seed,
            Command::Eval(c) => c.seed,
            Command::Streamsim(c) => c.seed,
            Command::Gradcheck(c) => c.seed,
            Command::Report(c) => c.seed,
            Command::Tx(c) => c.seed,
            Command::Rx(c) => c.seed,
        }
    }

    /// The configuration as a TOML document, usable again with `--config`.
    pub fn config_toml(&self) -> Result<String> {
        match self {
            Command::Train(c) => toml_text(c),
            Command::Sweep(c) => toml_text(c),
            Command::Eval(c) => toml_text(c),
            Command::Streamsim(c) => toml_text(c),
            Command::Gradcheck(c) => toml_text(c),
            Command::Report(c) => toml_text(c),
            Command::Tx(c) => toml_text(c),
            Command::Rx(c) => toml_text(c),
        }
    }

    pub fn from_toml(name: &str, text: &str) -> Result<Self> {
        let ctx = format!("{name} config");
        Ok(match name {
            "train" => Command::Train(parse(text, &ctx)?),
            "sweep" => Command::Sweep(parse(text, &ctx)?),
            "eval" => Command::Eval(parse(text, &ctx)?),
            "streamsim" => Command::Streamsim(parse(text, &ctx)?),
            "gradcheck" => Command::Gradcheck(parse(text, &ctx)?),
            "report" => Command::Report(parse(text, &ctx)?),
            "tx" => Command::Tx(parse(text, &ctx)?),
            "rx" => Command::Rx(parse(text, &ctx)?),
            other => return Err(Error::Config(format!("unknown command `{other}`"))),
        })
    }

    pub fn run(&self, out_dir: &Path) -> Result<Outcome> {
        match self {
            Command::Train(c) => commands::train(c, out_dir),
            Command::Sweep(c) => commands::sweep(c, out_dir),
            Command::Eval(c) => commands::eval(c, out_dir),
            Command::Streamsim(c) => commands::streamsim(c, out_dir).map(|(o, _)| o),
            Command::Gradcheck(c) => commands::gradcheck(c, out_dir),
            Command::Report(c) => commands::report(c, out_dir),
            Command::Tx(c) => commands::tx(c, out_dir),
            Command::Rx(c) => commands::rx(c, out_dir),
        }
    }
}

fn absolute(p: &str) -> Result<String> {
    if p.is_empty() {
        return Ok(String::new());
    }
    Ok(std::path::absolute(p)?.display().to_string())
}

fn has_key(t: Option<&Table>, key: &str) -> bool {
    t.is_some_and(|t| t.contains_key(key))
}

/// Builds a command from defaults, an optional config file and flag
/// overrides. Input paths are made absolute so a manifest replays from any
/// working directory.
pub fn resolve_command(name: &str, file: Option<&Table>, flags: &Table) -> Result<Command> {
    let ctx = format!("{name} config");
    let mut cmd = match name {
        "train" => {
            let first: TrainConfig = config::resolve(&TrainConfig::default_for(ModelConfig::ae_8_8()), file, flags, &ctx)?;
            // The default schedule depends on the model.
            let mut defaults = TrainConfig::default_for(first.model);
            if has_key(file, "total_steps") || flags.contains_key("total_steps") {
                defaults.total_steps = first.total_steps;
            }
            Command::Train(config::resolve(&defaults, file, flags, &ctx)?)
        }
        "sweep" => Command::Sweep(config::resolve(&SweepCommand::default(), file, flags, &ctx)?),
        "eval" => Command::Eval(config::resolve(&EvalCommand::default(), file, flags, &ctx)?),
        "streamsim" => Command::Streamsim(config::resolve(&StreamsimCommand::default(), file, flags, &ctx)?),
        "gradcheck" => Command::Gradcheck(config::resolve(&GradcheckConfig::default(), file, flags, &ctx)?),
        "report" => Command::Report(config::resolve(&ReportCommand::default(), file, flags, &ctx)?),
        "tx" => Command::Tx(config::resolve(&TxCommand::default(), file, flags, &ctx)?),
        "rx" => Command::Rx(config::resolve(&RxCommand::default(), file, flags, &ctx)?),
        other => return Err(Error::Config(format!("unknown command `{other}`"))),
    };
    match &mut cmd {
        Command::Train(c) => c.validate()?,
        Command::Sweep(c) => {
            for b in &mut c.bundles {
                *b = absolute(b)?;
            }
        }
        Command::Eval(c) => c.bundle = absolute(&c.bundle)?,
        Command::Streamsim(c) => c.bundle = absolute(&c.bundle)?,
        Command::Gradcheck(c) => c.validate()?,
        Command::Report(c) => {
            for i in &mut c.inputs {
                *i = absolute(i)?;
            }
        }
        Command::Tx(c) => {
            c.bundle = absolute(&c.bundle)?;
            if let Some(s) = &mut c.symbols_file {
                *s = absolute(s)?;
            }
        }
        Command::Rx(c) => {
            c.bundle = absolute(&c.bundle)?;
            c.iq_file = absolute(&c.iq_file)?;
            if let Some(r) = &mut c.reference {
                *r = absolute(r)?;
            }
        }
    }
    Ok(cmd)
}

/// Runs `cmd` into `out_dir` and writes its manifest there.
pub fn execute(cmd: &Command, out_dir: &Path) -> Result<(RunManifest, Outcome)> {
    fs::create_dir_all(out_dir)?;
    let started = now();
    let outcome = cmd.run(out_dir)?;
    let manifest = RunManifest {
        manifest_version: MANIFEST_VERSION,
        command: cmd.name().to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cmd.seed(),
        config: cmd.config_toml()?,
        out_dir: out_dir.display().to_string(),
        artifacts: artifacts(out_dir, &outcome.files)?,
        measurements: outcome.measurements.clone(),
        started,
        finished: now(),
    };
    manifest.save(out_dir)?;
    Ok((manifest, outcome))
}

/// Result of re-running a manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub manifest: RunManifest,
    pub outcome: Outcome,
    /// Artifacts whose bytes differ from the original run.
    pub mismatches: Vec<String>,
}

/// Re-runs the command recorded in `manifest_path` into `out_dir` and compares
/// every artifact digest with the original.
pub fn replay(manifest_path: &Path, out_dir: Option<&Path>) -> Result<Replay> {
    let original = RunManifest::load(manifest_path)?;
    let cmd = Command::from_toml(&original.command, &original.config)?;
    let dir: PathBuf = match out_dir {
        Some(d) => d.to_path_buf(),
        None => PathBuf::from(&original.out_dir).join("replay"),
    };
    let (manifest, mut outcome) = execute(&cmd, &dir)?;
    let mismatches = original.mismatches(&manifest);
    if !mismatches.is_empty() && outcome.status == Status::Ok {
        outcome.status = Status::VerificationFailed(format!("replay differs in: {}", mismatches.join(", ")));
    }
    Ok(Replay {
        manifest,
        outcome,
        mismatches,
    })
}
