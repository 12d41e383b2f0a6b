//! Trace CSV and key-value manifest files.
//!
//! Reals are written in exponent form with 17 significant digits, which
//! parses back to the identical `f64` and never depends on locale.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::trace::TraceRecord;

pub const TRACE_HEADER: &str = "epoch,primal_value,suboptimality,nnz_fraction,touches,elapsed_seconds";

/// `x` with 17 significant digits.
pub fn format_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        // Rust's own spellings, which `str::parse::<f64>` accepts back
        format!("{x}")
    }
}

pub fn render_trace(records: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(TRACE_HEADER.len() + 1 + records.len() * 120);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            format_real(r.epoch),
            format_real(r.primal_value),
            format_real(r.suboptimality),
            format_real(r.nnz_fraction),
            r.touches,
            format_real(r.elapsed_seconds)
        ));
    }
    out
}

/// Writes `records` as CSV; an empty trace is rejected.
pub fn write_trace(records: &[TraceRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if records.is_empty() {
        return Err(Error::config(format!(
            "refusing to write an empty trace to {}",
            path.display()
        )));
    }
    fs::write(path, render_trace(records)).map_err(|e| Error::io(path, e))
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header {TRACE_HEADER:?}"),
            })
        }
    }
    let mut out = Vec::new();
    for (k, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: k + 1, message };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(err(format!("expected 6 fields, got {}", fields.len())));
        }
        let real = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| err(format!("{s:?} is not a number")))
        };
        out.push(TraceRecord {
            epoch: real(fields[0])?,
            primal_value: real(fields[1])?,
            suboptimality: real(fields[2])?,
            nnz_fraction: real(fields[3])?,
            touches: fields[4]
                .trim()
                .parse()
                .map_err(|_| err(format!("{:?} is not a count", fields[4])))?,
            elapsed_seconds: real(fields[5])?,
        });
    }
    Ok(out)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let path = path.as_ref();
    parse_trace(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// `key = value` lines in key order.
pub fn write_manifest(entries: &BTreeMap<String, String>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (k, v) in entries {
        writeln!(out, "{k} = {v}").expect("writing to memory");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn parse_manifest(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once(" = ").ok_or_else(|| Error::Parse {
            line: k + 1,
            message: "expected `key = value`".into(),
        })?;
        out.insert(key.to_string(), value.to_string());
    }
    Ok(out)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    parse_manifest(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
