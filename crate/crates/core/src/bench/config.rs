//! Command configuration: defaults, overlaid by an optional TOML file, overlaid
//! by command-line flags. Unknown keys and mistyped values are rejected with
//! the offending field named.

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use crate::error::{Error, Result};

/// Recursively merges `over` into `base`; tables merge, everything else replaces.
pub fn merge(base: &mut Table, over: &Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

pub fn to_table<T: Serialize>(value: &T) -> Result<Table> {
    match Value::try_from(value).map_err(|e| Error::Config(e.to_string()))? {
        Value::Table(t) => Ok(t),
        other => Err(Error::Config(format!("expected a table, got {}", other.type_str()))),
    }
}

pub fn parse_table(text: &str, context: &str) -> Result<Table> {
    text.parse::<Table>()
        .map_err(|e| Error::Config(format!("{context}: {}", e.message().trim())))
}

/// `defaults <- file <- flags`, then deserializes into `T`.
pub fn resolve<T: Serialize + DeserializeOwned>(
    defaults: &T,
    file: Option<&Table>,
    flags: &Table,
    context: &str,
) -> Result<T> {
    let mut t = to_table(defaults)?;
    if let Some(f) = file {
        merge(&mut t, f);
    }
    merge(&mut t, flags);
    from_table(t, context)
}

pub fn from_table<T: DeserializeOwned>(t: Table, context: &str) -> Result<T> {
    // Round-trip through text so that error messages carry the key path.
    let text = toml::to_string(&t).map_err(|e| Error::Config(e.to_string()))?;
    toml::from_str(&text).map_err(|e: toml::de::Error| {
        let at = e.span().and_then(|sp| key_at(&text, sp.start));
        let msg = e.message().trim();
        Error::Config(match at {
            Some(key) => format!("{context}: `{key}`: {msg}"),
            None => format!("{context}: {msg}"),
        })
    })
}

/// Dotted path of the key on the line containing byte `pos` of `text`.
fn key_at(text: &str, pos: usize) -> Option<String> {
    let line_start = text[..pos.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
    let line = text[line_start..].lines().next()?;
    let key = line.split('=').next()?.trim();
    if key.is_empty() || key.starts_with('[') {
        return None;
    }
    let section = text[..line_start]
        .lines()
        .rev()
        .find(|l| l.starts_with('['))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']' || c == ' ').to_string());
    Some(match section {
        Some(s) => format!("{s}.{key}"),
        None => key.to_string(),
    })
}

/// Sets `path` (dotted) to `value` in `t`, creating intermediate tables.
pub fn set(t: &mut Table, path: &str, value: impl Into<Value>) {
    let mut cur = t;
    let mut parts = path.split('.').peekable();
    while let Some(p) = parts.next() {
        if parts.peek().is_none() {
            cur.insert(p.to_string(), value.into());
            return;
        }
        cur = match cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new())) {
            Value::Table(t) => t,
            other => {
                *other = Value::Table(Table::new());
                match other {
                    Value::Table(t) => t,
                    _ => unreachable!(),
                }
            }
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Inner {
        a: f64,
        b: bool,
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Outer {
        seed: u64,
        inner: Inner,
    }

    fn defaults() -> Outer {
        Outer { seed: 1, inner: Inner { a: 0.5, b: true } }
    }

    #[test]
    fn layering() {
        let file = parse_table("seed = 7\n[inner]\na = 2.0\n", "cfg").unwrap();
        let mut flags = Table::new();
        set(&mut flags, "inner.b", false);
        let r: Outer = resolve(&defaults(), Some(&file), &flags, "cfg").unwrap();
        assert_eq!(r, Outer { seed: 7, inner: Inner { a: 2.0, b: false } });
    }

    #[test]
    fn unknown_and_mistyped_fields_are_named() {
        let file = parse_table("[inner]\nc = 1\n", "cfg").unwrap();
        let e = resolve(&defaults(), Some(&file), &Table::new(), "cfg").unwrap_err().to_string();
        assert!(e.contains('c') && e.contains("unknown field"), "{e}");
        let file = parse_table("seed = \"x\"\n", "cfg").unwrap();
        let e = resolve(&defaults(), Some(&file), &Table::new(), "cfg").unwrap_err().to_string();
        assert!(e.contains("`seed`"), "{e}");
        let file = parse_table("[inner]\na = \"y\"\n", "cfg").unwrap();
        let e = resolve(&defaults(), Some(&file), &Table::new(), "cfg").unwrap_err().to_string();
        assert!(e.contains("`inner.a`"), "{e}");
    }
}
