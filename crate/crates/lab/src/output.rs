//! Artifact writers. Every byte is a pure function of the data: floats go
//! through the canonical 17-significant-digit form, line endings are LF,
//! and JSON keys come from ordered maps, so reruns diff clean.

use crate::error::Result;
use crate::table::{Cell, MetricTable};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

pub const OUT_ENV: &str = "STOCHLAB_OUT";

/// Output directory precedence: explicit flag, then `STOCHLAB_OUT`, then
/// `./out`.
pub fn resolve_out_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(env) = std::env::var_os(OUT_ENV) {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    PathBuf::from("out")
}

/// RFC 4180 field: quote when a comma, quote, or line break appears,
/// doubling interior quotes.
fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n', '\r']) {
        let mut out = String::with_capacity(text.len() + 2);
        out.push('"');
        for ch in text.chars() {
            if ch == '"' {
                out.push('"');
            }
            out.push(ch);
        }
        out.push('"');
        out
    } else {
        text.to_string()
    }
}

fn cell_field(cell: &Cell) -> String {
    match cell {
        Cell::Int(v) => v.to_string(),
        Cell::Num(v) => stochlab_core::fmtnum::canonical_f64(*v),
        Cell::Text(t) => csv_field(t),
    }
}

pub fn render_csv(table: &MetricTable) -> String {
    let mut out = String::new();
    out.push_str(
        &table
            .columns
            .iter()
            .map(|c| csv_field(c))
            .collect::<Vec<_>>()
            .join(","),
    );
    out.push('\n');
    for row in &table.rows {
        out.push_str(&row.iter().map(cell_field).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

pub fn write_csv(path: &Path, table: &MetricTable) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, render_csv(table))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text)?;
    Ok(())
}
