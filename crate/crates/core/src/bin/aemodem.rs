//! Command-line front end: train, evaluate, sweep, stream-simulate, verify
//! and plot learned modems.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 training
//! divergence, 3 verification failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use aemodem::bench::config::{parse_table, set};
use aemodem::bench::{execute, replay, resolve_command, Status};
use aemodem::model::ModelConfig;
use aemodem::Error;
use clap::{Args, Parser, Subcommand};
use toml::{Table, Value};

#[derive(Parser)]
#[command(name = "aemodem", version, about = "Learned end-to-end modem bench")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args, Clone)]
struct Common {
    /// Seed for every random draw of the run.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving the outputs and the run manifest.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// TOML file with the command's settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Verb {
    /// Train an autoencoder and write its weight bundle and log.
    Train {
        #[command(flatten)]
        common: Common,
        /// Model name such as AE-8/8 or AE-8/8-2.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        batch_size: Option<u64>,
        /// Training SNR per sample, dB.
        #[arg(long)]
        es_n0_db: Option<f64>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        checkpoint_interval: Option<u64>,
        #[arg(long)]
        log_interval: Option<u64>,
    },
    /// SER over a list of SNR points for one or more bundles.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long = "bundle")]
        bundles: Vec<String>,
        /// Comma-separated SNR points per sample, dB.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        es_n0_db: Vec<f64>,
        /// Comma-separated SNR points per bit, dB.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        eb_n0_db: Vec<f64>,
        #[arg(long)]
        num_symbols: Option<u64>,
    },
    /// SER at one SNR, optionally per fixed attenuation.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bundle: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        es_n0_db: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        eb_n0_db: Option<f64>,
        /// Comma-separated fixed attenuations in (0, 1].
        #[arg(long, value_delimiter = ',')]
        attenuation: Vec<f64>,
        #[arg(long)]
        num_symbols: Option<u64>,
    },
    /// Stream simulation: TX, streaming channel, blockwise RX and scoring.
    Streamsim {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bundle: Option<String>,
        #[arg(long)]
        num_symbols: Option<u64>,
        #[arg(long)]
        start_offset: Option<u64>,
        #[arg(long)]
        window_symbols: Option<u64>,
        #[arg(long, allow_hyphen_values = true)]
        drift_ppm: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        es_n0_db: Option<f64>,
        #[arg(long)]
        attenuation: Option<f64>,
        #[arg(long)]
        phase_walk: Option<f64>,
        #[arg(long)]
        throughput_seconds: Option<f64>,
    },
    /// Finite-difference check of every backward rule.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        instances: Option<u64>,
        /// Model for the composite check.
        #[arg(long)]
        model: Option<String>,
        /// Corrupt one target's gradient (harness self-test).
        #[arg(long, hide = true)]
        corrupt: Option<String>,
    },
    /// SVG chart and merged CSV from result tables.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long = "input")]
        inputs: Vec<String>,
        #[arg(long, value_parser = ["eb", "es", "amplitude", "window"])]
        axis: Option<String>,
        /// Linear SER axis instead of logarithmic.
        #[arg(long)]
        linear: bool,
        /// Overlay the theoretical BPSK curve.
        #[arg(long)]
        bpsk: bool,
        #[arg(long)]
        title: Option<String>,
    },
    /// Encode symbols to an IQ file.
    Tx {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bundle: Option<String>,
        /// File with one symbol per line; random symbols otherwise.
        #[arg(long)]
        symbols: Option<String>,
        #[arg(long)]
        num_symbols: Option<u64>,
    },
    /// Decode an IQ file blockwise.
    Rx {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bundle: Option<String>,
        #[arg(long)]
        iq: Option<String>,
        #[arg(long)]
        start_offset: Option<u64>,
        /// Sent symbols for alignment and scoring.
        #[arg(long)]
        reference: Option<String>,
    },
    /// Re-run a recorded command and compare every output digest.
    Replay {
        manifest: PathBuf,
        /// Defaults to `<original out-dir>/replay`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn opt<V: Into<Value>>(t: &mut Table, key: &str, v: Option<V>) {
    if let Some(v) = v {
        set(t, key, v);
    }
}

fn int(v: Option<u64>) -> Option<i64> {
    v.map(|x| x as i64)
}

fn list(t: &mut Table, key: &str, v: Vec<f64>) {
    if !v.is_empty() {
        set(t, key, Value::Array(v.into_iter().map(Value::Float).collect()));
    }
}

fn strings(t: &mut Table, key: &str, v: Vec<String>) {
    if !v.is_empty() {
        set(t, key, Value::Array(v.into_iter().map(Value::String).collect()));
    }
}

fn model_table(t: &mut Table, key: &str, name: Option<String>) -> aemodem::Result<()> {
    if let Some(name) = name {
        let m = ModelConfig::from_name(&name)?;
        set(t, &format!("{key}.k"), m.k as i64);
        set(t, &format!("{key}.n"), m.n as i64);
        set(t, &format!("{key}.sfe_enabled"), m.sfe_enabled);
    }
    Ok(())
}

/// Verb name, common flags and the verb's flag overrides.
fn flags(verb: Verb) -> aemodem::Result<(&'static str, Common, Table)> {
    let mut t = Table::new();
    let (name, common) = match verb {
        Verb::Train { common, model, steps, batch_size, es_n0_db, learning_rate, checkpoint_interval, log_interval } => {
            model_table(&mut t, "model", model)?;
            opt(&mut t, "total_steps", int(steps));
            opt(&mut t, "batch_size", int(batch_size));
            opt(&mut t, "channel.es_n0_db", es_n0_db);
            opt(&mut t, "optimizer.learning_rate", learning_rate);
            opt(&mut t, "checkpoint_interval", int(checkpoint_interval));
            opt(&mut t, "log_interval", int(log_interval));
            ("train", common)
        }
        Verb::Sweep { common, bundles, es_n0_db, eb_n0_db, num_symbols } => {
            strings(&mut t, "bundles", bundles);
            list(&mut t, "es_n0_db", es_n0_db);
            list(&mut t, "eb_n0_db", eb_n0_db);
            opt(&mut t, "num_symbols", int(num_symbols));
            ("sweep", common)
        }
        Verb::Eval { common, bundle, es_n0_db, eb_n0_db, attenuation, num_symbols } => {
            opt(&mut t, "bundle", bundle);
            opt(&mut t, "es_n0_db", es_n0_db);
            opt(&mut t, "eb_n0_db", eb_n0_db);
            list(&mut t, "attenuations", attenuation);
            opt(&mut t, "num_symbols", int(num_symbols));
            ("eval", common)
        }
        Verb::Streamsim { common, bundle, num_symbols, start_offset, window_symbols, drift_ppm, es_n0_db, attenuation, phase_walk, throughput_seconds } => {
            opt(&mut t, "bundle", bundle);
            opt(&mut t, "num_symbols", int(num_symbols));
            opt(&mut t, "start_offset", int(start_offset));
            opt(&mut t, "window_symbols", int(window_symbols));
            opt(&mut t, "channel.drift_ppm", drift_ppm);
            opt(&mut t, "channel.es_n0_db", es_n0_db);
            opt(&mut t, "channel.attenuation", attenuation);
            opt(&mut t, "channel.phase_walk", phase_walk);
            opt(&mut t, "throughput_seconds", throughput_seconds);
            ("streamsim", common)
        }
        Verb::Gradcheck { common, instances, model, corrupt } => {
            opt(&mut t, "instances", int(instances));
            opt(&mut t, "model", model);
            opt(&mut t, "corrupt", corrupt);
            ("gradcheck", common)
        }
        Verb::Report { common, inputs, axis, linear, bpsk, title } => {
            strings(&mut t, "inputs", inputs);
            opt(&mut t, "axis", axis);
            if linear {
                set(&mut t, "log_y", false);
            }
            if bpsk {
                set(&mut t, "bpsk", true);
            }
            opt(&mut t, "title", title);
            ("report", common)
        }
        Verb::Tx { common, bundle, symbols, num_symbols } => {
            opt(&mut t, "bundle", bundle);
            opt(&mut t, "symbols_file", symbols);
            opt(&mut t, "num_symbols", int(num_symbols));
            ("tx", common)
        }
        Verb::Rx { common, bundle, iq, start_offset, reference } => {
            opt(&mut t, "bundle", bundle);
            opt(&mut t, "iq_file", iq);
            opt(&mut t, "start_offset", int(start_offset));
            opt(&mut t, "reference", reference);
            ("rx", common)
        }
        Verb::Replay { .. } => unreachable!("handled by the caller"),
    };
    opt(&mut t, "seed", common.seed.map(|s| s as i64));
    Ok((name, common, t))
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Diverged { .. } => 2,
        _ => 1,
    }
}

fn finish(status: &Status, warnings: &[String], out_dir: &std::path::Path) -> ExitCode {
    for w in warnings {
        eprintln!("warning: {w}");
    }
    match status {
        Status::Ok => {
            println!("outputs and manifest written to {}", out_dir.display());
            ExitCode::SUCCESS
        }
        Status::Diverged(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Status::VerificationFailed(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> aemodem::Result<ExitCode> {
    if let Verb::Replay { manifest, out_dir } = cli.verb {
        let r = replay(&manifest, out_dir.as_deref())?;
        let dir = PathBuf::from(&r.manifest.out_dir);
        if r.mismatches.is_empty() {
            println!("replay reproduced all {} artifacts", r.manifest.artifacts.len());
        }
        return Ok(finish(&r.outcome.status, &r.outcome.warnings, &dir));
    }
    let (name, common, overrides) = flags(cli.verb)?;
    let file = match &common.config {
        Some(p) => Some(parse_table(&fs::read_to_string(p)?, &p.display().to_string())?),
        None => None,
    };
    let cmd = resolve_command(name, file.as_ref(), &overrides)?;
    let out_dir = std::path::absolute(&common.out_dir)?;
    let (_, outcome) = execute(&cmd, &out_dir)?;
    if let Status::Ok = outcome.status {
        for (k, v) in &outcome.measurements {
            println!("{k} = {v}");
        }
    }
    Ok(finish(&outcome.status, &outcome.warnings, &out_dir))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
