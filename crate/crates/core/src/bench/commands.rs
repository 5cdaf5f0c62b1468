//! Bodies of the command-line verbs. Each takes a fully resolved
//! configuration and an output directory and reports the files it wrote.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::plot::{self, Chart, Series};
use super::table::{self, Schema};
use crate::channel::{
    eb_to_es, slip_source_index, stream_channel, ChannelParams, RngStream, StreamChannelParams,
};
use crate::error::{Error, Result};
use crate::model::{Autoencoder, ModelConfig, WeightBundle};
use crate::runtime::iq::{read_iq_file, read_symbols, write_iq_file, write_symbols};
use crate::runtime::{
    align_sequences, dominant_period, measure_throughput, rx_stream, symbol_at, tx_stream,
    IqStream, DEFAULT_SAMPLE_RATE,
};
use crate::trainer::{bpsk_ser_theoretical, evaluate_ser, TrainConfig, TrainLog, Trainer};
use crate::verify::{run_gradcheck, GradcheckConfig};

/// How a command ended when it did not fail outright.
#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Ok,
    /// Training stopped on sustained high loss; artifacts up to that point were written.
    Diverged(String),
    /// A verification (gradient check, replay) failed.
    VerificationFailed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Written files, relative to the output directory.
    pub files: Vec<PathBuf>,
    pub measurements: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub status: Status,
}

impl Outcome {
    fn new() -> Self {
        Self {
            files: Vec::new(),
            measurements: BTreeMap::new(),
            warnings: Vec::new(),
            status: Status::Ok,
        }
    }
}

fn load_model(path: &str) -> Result<Autoencoder<f32>> {
    WeightBundle::<f32>::load(path)
        .and_then(|b| b.to_model())
        .map_err(|e| Error::format(path, e.to_string()))
}

fn write_table(out_dir: &Path, name: &str, schema: &Schema, rows: &[Vec<String>], o: &mut Outcome) -> Result<()> {
    table::write(out_dir.join(name), schema, rows)?;
    o.files.push(PathBuf::from(name));
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v}")
}

// ---------------------------------------------------------------- train

pub fn train(config: &TrainConfig, out_dir: &Path) -> Result<Outcome> {
    config.validate()?;
    let mut o = Outcome::new();
    let mut trainer = Trainer::<f32>::new(*config)?;
    let ckpt = PathBuf::from("checkpoint.json");
    let result = trainer.run(|t| t.checkpoint()?.save(out_dir.join(&ckpt)));
    if config.checkpoint_interval > 0 && config.checkpoint_interval <= trainer.step {
        o.files.push(ckpt);
    }
    let rows: Vec<Vec<String>> = trainer
        .log
        .records
        .iter()
        .map(|r| vec![r.step.to_string(), format!("{:.6}", r.mean_loss), format!("{:.6}", r.accuracy)])
        .collect();
    write_table(out_dir, "train_log.csv", &table::TRAIN_LOG, &rows, &mut o)?;
    match result {
        Ok(()) => {
            let name = format!("{}.weights", config.model.file_stem());
            trainer.bundle().save(out_dir.join(&name))?;
            o.files.push(PathBuf::from(name));
        }
        Err(e @ (Error::Diverged { .. } | Error::NonFinite { .. })) => o.status = Status::Diverged(e.to_string()),
        Err(e) => return Err(e),
    }
    Ok(o)
}

/// Train log as stored by [`train`].
pub fn read_train_log(path: &Path) -> Result<TrainLog> {
    let t = table::read(path)?;
    let (steps, loss, acc) = (t.numbers("step")?, t.numbers("mean_loss")?, t.numbers("accuracy")?);
    Ok(TrainLog {
        records: (0..steps.len())
            .map(|i| crate::trainer::LogRecord {
                step: steps[i] as u64,
                mean_loss: loss[i],
                accuracy: acc[i],
            })
            .collect(),
    })
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepCommand {
    pub bundles: Vec<String>,
    /// SNR points per complex sample. Exactly one of the two lists is used.
    pub es_n0_db: Vec<f64>,
    /// SNR points per bit.
    pub eb_n0_db: Vec<f64>,
    pub num_symbols: u64,
    pub seed: u64,
    /// Channel distribution; its `es_n0_db` is replaced per point.
    pub channel: ChannelParams,
}

impl Default for SweepCommand {
    fn default() -> Self {
        Self {
            bundles: Vec::new(),
            es_n0_db: Vec::new(),
            eb_n0_db: Vec::new(),
            num_symbols: 1_000_000,
            seed: 1,
            channel: ChannelParams::default(),
        }
    }
}

/// Removes repeated values, keeping first occurrences.
pub fn dedup_points(values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut kept: Vec<f64> = Vec::new();
    let mut dropped = Vec::new();
    for &v in values {
        if kept.contains(&v) {
            dropped.push(v);
        } else {
            kept.push(v);
        }
    }
    (kept, dropped)
}

fn sweep_row(r: &crate::trainer::SweepRecord) -> Vec<String> {
    vec![
        r.model.clone(),
        num(r.es_n0_db),
        num(r.eb_n0_db),
        r.symbols.to_string(),
        r.errors.to_string(),
        num(r.ser),
    ]
}

pub fn sweep(cmd: &SweepCommand, out_dir: &Path) -> Result<Outcome> {
    let mut o = Outcome::new();
    if cmd.bundles.is_empty() {
        return Err(Error::Config("sweep needs at least one bundle".into()));
    }
    let (per_bit, list) = match (cmd.es_n0_db.is_empty(), cmd.eb_n0_db.is_empty()) {
        (false, true) => (false, &cmd.es_n0_db),
        (true, false) => (true, &cmd.eb_n0_db),
        (true, true) => return Err(Error::Config("the SNR list is empty".into())),
        (false, false) => return Err(Error::Config("give either es_n0_db or eb_n0_db, not both".into())),
    };
    if list.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("SNR points must be finite".into()));
    }
    let (points, dropped) = dedup_points(list);
    if !dropped.is_empty() {
        o.warnings.push(format!("duplicate SNR points ignored: {dropped:?}"));
    }
    if cmd.num_symbols == 0 {
        return Err(Error::Config("num_symbols must be at least 1".into()));
    }
    cmd.channel.validate()?;
    let models: Vec<Autoencoder<f32>> = cmd.bundles.iter().map(|b| load_model(b)).collect::<Result<_>>()?;
    let mut names: Vec<String> = Vec::new();
    for model in &models {
        let cfg = model.config();
        let file = format!("sweep_{}.csv", cfg.file_stem());
        if names.contains(&file) {
            return Err(Error::Config(format!("two bundles describe {}", cfg.name())));
        }
        let mut rows = Vec::new();
        for (i, &p) in points.iter().enumerate() {
            let es = if per_bit { eb_to_es(p, cfg.k, cfg.n) } else { p };
            let mut rng = RngStream::derive(cmd.seed, i as u64);
            let r = evaluate_ser(model, &cmd.channel.with_es_n0_db(es), cmd.num_symbols, &mut rng)?;
            rows.push(sweep_row(&r));
        }
        write_table(out_dir, &file, &table::SWEEP, &rows, &mut o)?;
        names.push(file);
    }
    Ok(o)
}

// ---------------------------------------------------------------- eval

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalCommand {
    pub bundle: String,
    /// Overrides `channel.es_n0_db` when set.
    pub es_n0_db: Option<f64>,
    /// SNR per bit; converted with the model's rate. Excludes `es_n0_db`.
    pub eb_n0_db: Option<f64>,
    /// Fixed attenuations to evaluate one by one; empty uses the channel's range.
    pub attenuations: Vec<f64>,
    pub num_symbols: u64,
    pub seed: u64,
    pub channel: ChannelParams,
}

impl Default for EvalCommand {
    fn default() -> Self {
        Self {
            bundle: String::new(),
            es_n0_db: None,
            eb_n0_db: None,
            attenuations: Vec::new(),
            num_symbols: 100_000,
            seed: 1,
            channel: ChannelParams::default(),
        }
    }
}

pub fn eval(cmd: &EvalCommand, out_dir: &Path) -> Result<Outcome> {
    let mut o = Outcome::new();
    let model = load_model(&cmd.bundle)?;
    let cfg = model.config();
    let es = match (cmd.es_n0_db, cmd.eb_n0_db) {
        (Some(_), Some(_)) => return Err(Error::Config("give either es_n0_db or eb_n0_db, not both".into())),
        (Some(es), None) => es,
        (None, Some(eb)) => eb_to_es(eb, cfg.k, cfg.n),
        (None, None) => cmd.channel.es_n0_db,
    };
    let channel = cmd.channel.with_es_n0_db(es);
    channel.validate()?;
    let settings: Vec<Option<f64>> = if cmd.attenuations.is_empty() {
        vec![None]
    } else {
        cmd.attenuations.iter().map(|&a| Some(a)).collect()
    };
    let mut rows = Vec::new();
    for (i, a) in settings.iter().enumerate() {
        let ch = match a {
            Some(a) => channel.with_attenuation(*a),
            None => channel,
        };
        ch.validate()?;
        let r = evaluate_ser(&model, &ch, cmd.num_symbols, &mut RngStream::derive(cmd.seed, i as u64))?;
        rows.push(vec![
            r.model.clone(),
            num(r.es_n0_db),
            num(r.eb_n0_db),
            a.map(num).unwrap_or_default(),
            r.symbols.to_string(),
            r.errors.to_string(),
            num(r.ser),
        ]);
    }
    write_table(out_dir, &format!("eval_{}.csv", cfg.file_stem()), &table::EVAL, &rows, &mut o)?;
    Ok(o)
}

// ---------------------------------------------------------------- streaming

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamsimCommand {
    pub bundle: String,
    pub num_symbols: usize,
    pub seed: u64,
    pub start_offset: usize,
    pub window_symbols: usize,
    pub max_lag: usize,
    pub sample_rate: f64,
    /// Seconds of repeated decoding for the throughput figure; 0 skips it.
    pub throughput_seconds: f64,
    pub channel: StreamChannelParams,
}

impl Default for StreamsimCommand {
    fn default() -> Self {
        Self {
            bundle: String::new(),
            num_symbols: 100_000,
            seed: 1,
            start_offset: 0,
            window_symbols: 125,
            max_lag: 16,
            sample_rate: DEFAULT_SAMPLE_RATE,
            throughput_seconds: 0.0,
            channel: StreamChannelParams::clean(),
        }
    }
}

/// Scored stream: per-window SER plus the summary figures.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamReport {
    pub model: String,
    pub symbols_sent: usize,
    pub symbols_decoded: usize,
    pub symbols_scored: usize,
    pub errors: usize,
    pub ser: f64,
    /// `decoded[i]` is scored against `sent[i + lag]` (initial lag under drift).
    pub lag: i64,
    /// `aligned` (best constant lag) or `slip-map` (reference follows the slips).
    pub scoring: &'static str,
    pub window_symbols: usize,
    pub windowed_ser: Vec<f64>,
    pub window_sizes: Vec<usize>,
    pub slip_period: Option<usize>,
    /// One full cycle of the receiver through all `2n` offsets, in windows.
    pub predicted_period_windows: Option<f64>,
    pub peak_lag_windows: Option<usize>,
}

impl StreamReport {
    fn rows(&self) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
        let mut first = 0;
        let windows = self
            .windowed_ser
            .iter()
            .zip(&self.window_sizes)
            .enumerate()
            .map(|(i, (&s, &len))| {
                let row = vec![
                    self.model.clone(),
                    i.to_string(),
                    first.to_string(),
                    len.to_string(),
                    ((s * len as f64).round() as usize).to_string(),
                    num(s),
                ];
                first += len;
                row
            })
            .collect();
        let opt = |v: Option<String>| v.unwrap_or_default();
        let summary = vec![vec![
            self.model.clone(),
            self.symbols_sent.to_string(),
            self.symbols_decoded.to_string(),
            self.symbols_scored.to_string(),
            self.errors.to_string(),
            num(self.ser),
            self.lag.to_string(),
            self.scoring.to_string(),
            self.window_symbols.to_string(),
            opt(self.slip_period.map(|p| p.to_string())),
            opt(self.predicted_period_windows.map(num)),
            opt(self.peak_lag_windows.map(|p| p.to_string())),
        ]];
        (windows, summary)
    }
}

fn score_runs(expected: &[usize], decoded: &[usize], window_symbols: usize) -> (Vec<f64>, Vec<usize>, usize) {
    let mut series = Vec::new();
    let mut sizes = Vec::new();
    let mut errors = 0;
    for (e, d) in expected.chunks(window_symbols).zip(decoded.chunks(window_symbols)) {
        let errs = e.iter().zip(d).filter(|(a, b)| a != b).count();
        errors += errs;
        series.push(errs as f64 / e.len() as f64);
        sizes.push(e.len());
    }
    (series, sizes, errors)
}

/// Scores `decoded` (windows at `start_offset + j 2n` of the received stream)
/// against `sent`. Without clock slips the best constant lag is used; with
/// slips every window is matched to the symbol it actually covers.
pub fn score_stream(
    config: ModelConfig,
    sent: &[usize],
    decoded: &[usize],
    start_offset: usize,
    window_symbols: usize,
    max_lag: usize,
    slips: Option<(usize, bool)>,
) -> Result<StreamReport> {
    if window_symbols == 0 {
        return Err(Error::Config("window_symbols must be at least 1".into()));
    }
    let n = config.n;
    let (expected, decoded_scored, lag, scoring): (Vec<usize>, Vec<usize>, i64, &'static str) = match slips {
        None => {
            let a = align_sequences(sent, decoded, max_lag)?;
            let lo = (-a.lag).max(0) as usize;
            let pairs: Vec<(usize, usize)> = (lo..lo + a.overlap)
                .map(|i| (sent[(i as i64 + a.lag) as usize], decoded[i]))
                .collect();
            (pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect(), a.lag, "aligned")
        }
        Some((period, delete)) => {
            let mut e = Vec::new();
            let mut d = Vec::new();
            for (j, &sym) in decoded.iter().enumerate() {
                let src = slip_source_index(start_offset + 2 * n * j, period, delete);
                if src == usize::MAX {
                    break;
                }
                let idx = symbol_at(src, n);
                if idx < sent.len() {
                    e.push(sent[idx]);
                    d.push(sym);
                }
            }
            if e.is_empty() {
                return Err(Error::Domain("no decoded window maps onto a sent symbol".into()));
            }
            let lag = symbol_at(start_offset, n) as i64;
            (e, d, lag, "slip-map")
        }
    };
    let (series, sizes, errors) = score_runs(&expected, &decoded_scored, window_symbols);
    let predicted = slips.map(|(p, _)| p as f64 / window_symbols as f64);
    Ok(StreamReport {
        model: config.name(),
        symbols_sent: sent.len(),
        symbols_decoded: decoded.len(),
        symbols_scored: expected.len(),
        errors,
        ser: errors as f64 / expected.len() as f64,
        lag,
        scoring,
        window_symbols,
        peak_lag_windows: dominant_period(&series),
        windowed_ser: series,
        window_sizes: sizes,
        slip_period: slips.map(|s| s.0),
        predicted_period_windows: predicted,
    })
}

fn random_symbols(m: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = RngStream::keyed(seed, 0x5E7D);
    (0..count).map(|_| rng.below(m as u64) as usize).collect()
}

fn iq_meta(model: &ModelConfig, extra: &[(&str, String)]) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("model".to_string(), model.name());
    for (k, v) in extra {
        m.insert(k.to_string(), v.clone());
    }
    m
}

fn push_iq(o: &mut Outcome, name: &str) {
    o.files.push(PathBuf::from(name));
    o.files.push(PathBuf::from(format!("{name}.meta")));
}

pub fn streamsim(cmd: &StreamsimCommand, out_dir: &Path) -> Result<(Outcome, StreamReport)> {
    let mut o = Outcome::new();
    cmd.channel.validate()?;
    if !(cmd.sample_rate > 0.0) {
        return Err(Error::Config("sample_rate must be positive".into()));
    }
    let model = load_model(&cmd.bundle)?;
    let cfg = model.config();
    if cmd.num_symbols == 0 {
        return Err(Error::Config("num_symbols must be at least 1".into()));
    }
    let sent = random_symbols(cfg.m(), cmd.num_symbols, cmd.seed);
    let mut tx = tx_stream(&model.encoder, &sent)?;
    tx.sample_rate = cmd.sample_rate;
    let rx_samples = stream_channel(&tx.samples, &cmd.channel, &mut RngStream::keyed(cmd.seed, 0xC4A2))?;
    let rx = IqStream::new(rx_samples, cmd.sample_rate)?;
    let decoded = rx_stream(&model.decoder, &rx, cmd.start_offset)?;

    write_symbols(out_dir.join("sent.txt"), &sent)?;
    o.files.push("sent.txt".into());
    write_iq_file(out_dir.join("tx.cf32"), &tx, &iq_meta(&cfg, &[]))?;
    push_iq(&mut o, "tx.cf32");
    let channel_desc = toml::to_string(&cmd.channel).unwrap_or_default().replace('\n', "; ");
    write_iq_file(out_dir.join("rx.cf32"), &rx, &iq_meta(&cfg, &[("channel", channel_desc)]))?;
    push_iq(&mut o, "rx.cf32");
    write_symbols(out_dir.join("decoded.txt"), &decoded)?;
    o.files.push("decoded.txt".into());

    let slips = cmd.channel.slip_period().map(|p| (p, cmd.channel.drift_ppm > 0.0));
    let report = score_stream(cfg, &sent, &decoded, cmd.start_offset, cmd.window_symbols, cmd.max_lag, slips)?;
    let (windows, summary) = report.rows();
    write_table(out_dir, "stream_windows.csv", &table::STREAM_WINDOWS, &windows, &mut o)?;
    write_table(out_dir, "stream_report.csv", &table::STREAM_REPORT, &summary, &mut o)?;
    if cmd.throughput_seconds > 0.0 {
        let t = measure_throughput(&model.decoder, &rx, Duration::from_secs_f64(cmd.throughput_seconds))?;
        o.measurements.insert("throughput_bits_per_second".into(), t.bits_per_second);
        o.measurements.insert("throughput_windows".into(), t.windows as f64);
    }
    Ok((o, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TxCommand {
    pub bundle: String,
    /// Symbols to send, one per line; random symbols are drawn when unset.
    pub symbols_file: Option<String>,
    pub num_symbols: usize,
    pub seed: u64,
    pub sample_rate: f64,
}

impl Default for TxCommand {
    fn default() -> Self {
        Self {
            bundle: String::new(),
            symbols_file: None,
            num_symbols: 1_000,
            seed: 1,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }
}

pub fn tx(cmd: &TxCommand, out_dir: &Path) -> Result<Outcome> {
    let mut o = Outcome::new();
    let model = load_model(&cmd.bundle)?;
    let cfg = model.config();
    let sent = match &cmd.symbols_file {
        Some(p) => read_symbols(p)?,
        None => random_symbols(cfg.m(), cmd.num_symbols, cmd.seed),
    };
    let mut stream = tx_stream(&model.encoder, &sent)?;
    if !(cmd.sample_rate > 0.0) {
        return Err(Error::Config("sample_rate must be positive".into()));
    }
    stream.sample_rate = cmd.sample_rate;
    write_iq_file(out_dir.join("tx.cf32"), &stream, &iq_meta(&cfg, &[]))?;
    push_iq(&mut o, "tx.cf32");
    write_symbols(out_dir.join("sent.txt"), &sent)?;
    o.files.push("sent.txt".into());
    Ok(o)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RxCommand {
    pub bundle: String,
    pub iq_file: String,
    pub start_offset: usize,
    /// Sent symbols; when set the decoded stream is aligned and scored.
    pub reference: Option<String>,
    pub max_lag: usize,
    pub window_symbols: usize,
    pub seed: u64,
}

impl Default for RxCommand {
    fn default() -> Self {
        Self {
            bundle: String::new(),
            iq_file: String::new(),
            start_offset: 0,
            reference: None,
            max_lag: 16,
            window_symbols: 125,
            seed: 1,
        }
    }
}

pub fn rx(cmd: &RxCommand, out_dir: &Path) -> Result<Outcome> {
    let mut o = Outcome::new();
    let model = load_model(&cmd.bundle)?;
    let cfg = model.config();
    let (stream, _) = read_iq_file::<f32>(&cmd.iq_file)?;
    let decoded = rx_stream(&model.decoder, &stream, cmd.start_offset)?;
    write_symbols(out_dir.join("decoded.txt"), &decoded)?;
    o.files.push("decoded.txt".into());
    if let Some(r) = &cmd.reference {
        let sent = read_symbols(r)?;
        let report = score_stream(cfg, &sent, &decoded, cmd.start_offset, cmd.window_symbols, cmd.max_lag, None)?;
        let (windows, summary) = report.rows();
        write_table(out_dir, "rx_windows.csv", &table::STREAM_WINDOWS, &windows, &mut o)?;
        write_table(out_dir, "rx_report.csv", &table::STREAM_REPORT, &summary, &mut o)?;
    }
    Ok(o)
}

// ---------------------------------------------------------------- gradcheck

pub fn gradcheck(cmd: &GradcheckConfig, out_dir: &Path) -> Result<Outcome> {
    let mut o = Outcome::new();
    let report = run_gradcheck(cmd)?;
    let rows: Vec<Vec<String>> = report
        .checks
        .iter()
        .map(|c| {
            vec![
                c.target.clone(),
                c.instances.to_string(),
                c.checked.to_string(),
                c.excluded.to_string(),
                format!("{:.3e}", c.max_relative_error),
                c.passed.to_string(),
            ]
        })
        .collect();
    write_table(out_dir, "gradcheck.csv", &table::GRADCHECK, &rows, &mut o)?;
    if !report.passed() {
        o.status = Status::VerificationFailed(format!(
            "gradient check failed for: {}",
            report.failures().join(", ")
        ));
    }
    Ok(o)
}

// ---------------------------------------------------------------- report

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// SNR per bit.
    #[default]
    Eb,
    /// SNR per complex sample.
    Es,
    /// Fixed channel attenuation.
    Amplitude,
    /// Time window index of a stream.
    Window,
}

impl Axis {
    pub fn column(self) -> &'static str {
        match self {
            Axis::Eb => "eb_n0_db",
            Axis::Es => "es_n0_db",
            Axis::Amplitude => "attenuation",
            Axis::Window => "window",
        }
    }

    fn label(self) -> &'static str {
        match self {
            Axis::Eb => "Eb/N0 [dB]",
            Axis::Es => "Es/N0 per sample [dB]",
            Axis::Amplitude => "relative amplitude a",
            Axis::Window => "window index",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportCommand {
    pub inputs: Vec<String>,
    pub axis: Axis,
    pub log_y: bool,
    /// Adds the theoretical BPSK curve (SNR axes only).
    pub bpsk: bool,
    pub title: String,
    pub seed: u64,
}

impl Default for ReportCommand {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            axis: Axis::Eb,
            log_y: true,
            bpsk: false,
            title: "Symbol error rate".into(),
            seed: 1,
        }
    }
}

/// Step of the sampled BPSK overlay, dB.
const BPSK_STEP_DB: f64 = 0.25;

pub fn report(cmd: &ReportCommand, out_dir: &Path) -> Result<Outcome> {
    let mut o = Outcome::new();
    if cmd.inputs.is_empty() {
        return Err(Error::Config("report needs at least one input CSV".into()));
    }
    // One series per (input, model); labels gain the file name when a model repeats.
    let mut keyed: Vec<(usize, String, Vec<(f64, f64)>)> = Vec::new();
    let mut merged = Vec::new();
    for (i, input) in cmd.inputs.iter().enumerate() {
        let t = table::read(input)?;
        if t.rows.is_empty() {
            return Err(Error::format(input, "table has no rows"));
        }
        if t.column(cmd.axis.column()).is_none() {
            return Err(Error::Config(format!(
                "{input}: axis `{}` needs column `{}`, which a {} table does not have",
                serde_json::to_value(cmd.axis).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                cmd.axis.column(),
                t.schema.name
            )));
        }
        let xs = t.numbers(cmd.axis.column())?;
        let ys = t.numbers("ser")?;
        let models = t.strings("model")?;
        let source = Path::new(input).file_name().map(|f| f.to_string_lossy().to_string()).unwrap_or_default();
        for ((x, y), m) in xs.iter().zip(&ys).zip(&models) {
            merged.push(vec![source.clone(), m.clone(), num(*x), num(*y)]);
            match keyed.iter_mut().find(|k| k.0 == i && &k.1 == m) {
                Some(k) => k.2.push((*x, *y)),
                None => keyed.push((i, m.clone(), vec![(*x, *y)])),
            }
        }
    }
    let mut series: Vec<Series> = Vec::new();
    for (i, model, mut points) in keyed.iter().cloned() {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let repeated = keyed.iter().filter(|k| k.1 == model).count() > 1;
        series.push(Series {
            label: if repeated { format!("{model} ({})", cmd.inputs[i]) } else { model },
            points,
            dashed: false,
        });
    }
    if cmd.bpsk {
        if !matches!(cmd.axis, Axis::Eb | Axis::Es) {
            return Err(Error::Config("the BPSK overlay needs an SNR axis".into()));
        }
        let (lo, hi) = series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        let steps = ((hi - lo) / BPSK_STEP_DB).floor() as usize;
        // BPSK carries one bit per real sample, so both SNR axes coincide.
        let points = (0..=steps)
            .map(|i| {
                let x = lo + i as f64 * BPSK_STEP_DB;
                (x, bpsk_ser_theoretical(x))
            })
            .collect();
        series.push(Series {
            label: "BPSK (theory)".into(),
            points,
            dashed: true,
        });
    }
    let chart = Chart {
        title: cmd.title.clone(),
        x_label: cmd.axis.label().into(),
        y_label: "SER".into(),
        log_y: cmd.log_y,
        series,
    };
    fs::write(out_dir.join("report.svg"), plot::render(&chart)?)?;
    o.files.push("report.svg".into());
    write_table(out_dir, "report.csv", &table::MERGED, &merged, &mut o)?;
    Ok(o)
}
