//! Versioned CSV tables. The first line names the schema, e.g.
//! `#schema=sweep/1`; readers reject other names and versions.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const SCHEMA_PREFIX: &str = "#schema=";

/// A known table layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schema {
    pub name: &'static str,
    pub version: u32,
    pub columns: &'static [&'static str],
}

pub const SWEEP: Schema = Schema {
    name: "sweep",
    version: 1,
    columns: &["model", "es_n0_db", "eb_n0_db", "symbols", "errors", "ser"],
};

pub const EVAL: Schema = Schema {
    name: "eval",
    version: 1,
    columns: &["model", "es_n0_db", "eb_n0_db", "attenuation", "symbols", "errors", "ser"],
};

pub const STREAM_WINDOWS: Schema = Schema {
    name: "stream-windows",
    version: 1,
    columns: &["model", "window", "first_symbol", "symbols", "errors", "ser"],
};

pub const STREAM_REPORT: Schema = Schema {
    name: "stream-report",
    version: 1,
    columns: &[
        "model",
        "symbols_sent",
        "symbols_decoded",
        "symbols_scored",
        "errors",
        "ser",
        "lag",
        "scoring",
        "window_symbols",
        "slip_period",
        "predicted_period_windows",
        "peak_lag_windows",
    ],
};

pub const GRADCHECK: Schema = Schema {
    name: "gradcheck",
    version: 1,
    columns: &["target", "instances", "checked", "excluded", "max_relative_error", "passed"],
};

pub const TRAIN_LOG: Schema = Schema {
    name: "train-log",
    version: 1,
    columns: &["step", "mean_loss", "accuracy"],
};

pub const MERGED: Schema = Schema {
    name: "merged",
    version: 1,
    columns: &["source", "model", "x", "ser"],
};

pub const ALL: [Schema; 7] = [SWEEP, EVAL, STREAM_WINDOWS, STREAM_REPORT, GRADCHECK, TRAIN_LOG, MERGED];

fn csv_err(e: csv::Error) -> Error {
    Error::format("csv", e.to_string())
}

/// Renders a table with its schema line and header.
pub fn render(schema: &Schema, rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut out = format!("{SCHEMA_PREFIX}{}/{}\n", schema.name, schema.version).into_bytes();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(schema.columns).map_err(csv_err)?;
    for row in rows {
        if row.len() != schema.columns.len() {
            return Err(Error::Shape(format!(
                "{} row has {} fields, expected {}",
                schema.name,
                row.len(),
                schema.columns.len()
            )));
        }
        w.write_record(row).map_err(csv_err)?;
    }
    out.extend(w.into_inner().map_err(|e| Error::format("csv", e.to_string()))?);
    Ok(out)
}

pub fn write(path: impl AsRef<Path>, schema: &Schema, rows: &[Vec<String>]) -> Result<()> {
    fs::write(path, render(schema, rows)?)?;
    Ok(())
}

/// A parsed table; `rows` excludes the header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: Schema,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.schema.columns.iter().position(|c| *c == name)
    }

    /// Column parsed as numbers; fails naming the row on bad cells.
    pub fn numbers(&self, name: &str) -> Result<Vec<f64>> {
        let c = self
            .column(name)
            .ok_or_else(|| Error::format(self.schema.name, format!("no column `{name}`")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r[c].parse::<f64>().map_err(|_| {
                    Error::format(self.schema.name, format!("row {}: `{}` is not a number in `{name}`", i + 1, r[c]))
                })
            })
            .collect()
    }

    pub fn strings(&self, name: &str) -> Result<Vec<String>> {
        let c = self
            .column(name)
            .ok_or_else(|| Error::format(self.schema.name, format!("no column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[c].clone()).collect())
    }
}

pub fn parse(text: &str, context: &str) -> Result<Table> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let tag = first
        .trim_end()
        .strip_prefix(SCHEMA_PREFIX)
        .ok_or_else(|| Error::format(context, "missing schema line"))?;
    let (name, version) = tag
        .split_once('/')
        .ok_or_else(|| Error::format(context, format!("malformed schema tag `{tag}`")))?;
    let schema = ALL
        .iter()
        .find(|s| s.name == name)
        .copied()
        .ok_or_else(|| Error::format(context, format!("unknown schema `{name}`")))?;
    if version.parse::<u32>().ok() != Some(schema.version) {
        return Err(Error::format(
            context,
            format!("schema {name} version {version} is not supported (expected {})", schema.version),
        ));
    }
    let mut r = csv::Reader::from_reader(rest.as_bytes());
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header != schema.columns {
        return Err(Error::format(context, format!("columns {header:?} do not match schema {name}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::format(context, e.to_string()))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(Table { schema, rows })
}

pub fn read(path: impl AsRef<Path>) -> Result<Table> {
    let path = path.as_ref();
    parse(&fs::read_to_string(path)?, &path.display().to_string())
}
