use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Fixed column count; indices beyond it are an error.
    pub n_features: Option<usize>,
    /// Map labels `{0, 1}` and `{−1, +1}` onto `{−1, +1}`.
    pub coerce_pm1: bool,
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_label(token: &str, line: usize, coerce: bool) -> Result<f64> {
    let value: f64 = token
        .parse()
        .map_err(|_| parse_error(line, format!("label `{token}` is not a number")))?;
    if !value.is_finite() {
        return Err(parse_error(line, format!("label `{token}` is not finite")));
    }
    if !coerce {
        return Ok(value);
    }
    if value == 1.0 {
        Ok(1.0)
    } else if value == 0.0 || value == -1.0 {
        Ok(-1.0)
    } else {
        Err(parse_error(line, format!("label `{token}` is not one of 0, 1, -1, +1")))
    }
}

/// Parses `<label> <index>:<value> ...` lines with 1-based, strictly
/// increasing indices. Blank lines and `#` comments are skipped.
pub fn parse_libsvm(reader: impl BufRead, options: ParseOptions) -> Result<Dataset> {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0;
    for (i, line) in reader.lines().enumerate() {
        let number = i + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label = parse_label(tokens.next().unwrap_or_default(), number, options.coerce_pm1)?;
        let mut row = Vec::new();
        let mut last = 0;
        for token in tokens {
            let (idx, val) = token
                .split_once(':')
                .ok_or_else(|| parse_error(number, format!("expected index:value, got `{token}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_error(number, format!("index `{idx}` is not a positive integer")))?;
            let val: f64 = val
                .parse()
                .map_err(|_| parse_error(number, format!("value `{val}` is not a number")))?;
            if idx == 0 {
                return Err(parse_error(number, "indices are 1-based"));
            }
            if idx == last {
                return Err(parse_error(number, format!("duplicate index {idx}")));
            }
            if idx < last {
                return Err(parse_error(number, format!("index {idx} follows {last}; indices must increase")));
            }
            if !val.is_finite() {
                return Err(parse_error(number, format!("value `{val}` is not finite")));
            }
            if options.n_features.is_some_and(|n| idx > n) {
                return Err(parse_error(number, format!("index {idx} exceeds the declared feature count")));
            }
            last = idx;
            row.push((idx - 1, val));
        }
        max_index = max_index.max(last);
        features.push(row);
        labels.push(label);
    }
    Ok(Dataset {
        rows: labels.len(),
        cols: options.n_features.unwrap_or(max_index),
        features,
        labels,
    })
}

pub fn read_libsvm(path: &Path, options: ParseOptions) -> Result<Dataset> {
    parse_libsvm(BufReader::new(File::open(path)?), options)
}

/// Writes a dataset in LIBSVM format with shortest round-trip float output.
pub fn emit_libsvm(data: &Dataset) -> String {
    let mut out = String::new();
    for (row, label) in data.features.iter().zip(&data.labels) {
        write!(out, "{label}").unwrap();
        for (j, v) in row {
            write!(out, " {}:{v}", j + 1).unwrap();
        }
        out.push('\n');
    }
    out
}
