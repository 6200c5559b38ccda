//! Flat `key = value` text format shared by parameter configs and scan files.

use std::path::Path;

use crate::error::{Error, Result};

/// One non-empty, non-comment line of a config file.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits `text` into entries. `#` starts a comment anywhere on a line.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{line}`", i + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        if let Some(prev) = entries.iter().find(|e| e.key == key) {
            return Err(Error::Config(format!("line {}: key `{key}` already set on line {}", i + 1, prev.line)));
        }
        entries.push(Entry { line: i + 1, key: key.to_owned(), value: value.trim().to_owned() });
    }
    Ok(entries)
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

pub(crate) fn parse_f64(entry: &Entry) -> Result<f64> {
    let v: f64 = entry.value.parse().map_err(|_| {
        Error::Config(format!("line {}: `{}` expects a number, got `{}`", entry.line, entry.key, entry.value))
    })?;
    if !v.is_finite() {
        return Err(Error::Config(format!("line {}: `{}` must be finite", entry.line, entry.key)));
    }
    Ok(v)
}

pub(crate) fn parse_usize(entry: &Entry) -> Result<usize> {
    entry.value.parse().map_err(|_| {
        Error::Config(format!(
            "line {}: `{}` expects a non-negative integer, got `{}`",
            entry.line, entry.key, entry.value
        ))
    })
}
