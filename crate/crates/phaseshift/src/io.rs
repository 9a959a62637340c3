//! File formats.
//!
//! Tables are CSV preceded by `# key=value` provenance lines. Numbers are
//! written in the shortest form that parses back to the same `f64`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{bail, Context};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// SHA-256 of the canonical configuration, hex encoded.
pub fn fingerprint(config: &RunConfig) -> String {
    hex::encode(Sha256::digest(config.canonical_json().as_bytes()))
}

/// Shortest decimal form that parses back to `x`; exponent notation outside
/// `[1e-5, 1e16)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn comment_block(meta: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (key, value) in meta {
        let _ = writeln!(out, "# {key}={value}");
    }
    out
}

fn csv_body(header: &[String], rows: &[Vec<String>]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
    Ok(String::from_utf8(bytes)?)
}

/// `l,delta` table.
pub fn shift_table(meta: &[(&str, String)], shifts: &[f64]) -> anyhow::Result<String> {
    let rows: Vec<Vec<String>> = shifts
        .iter()
        .enumerate()
        .map(|(l, d)| vec![l.to_string(), num(*d)])
        .collect();
    let body = csv_body(&["l".to_string(), "delta".to_string()], &rows)?;
    Ok(comment_block(meta) + &body)
}

/// A parsed shift table with its provenance lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftTable {
    pub meta: BTreeMap<String, String>,
    pub shifts: Vec<f64>,
}

impl ShiftTable {
    /// The `k` recorded in the header, if any.
    pub fn k(&self) -> anyhow::Result<Option<f64>> {
        self.meta
            .get("k")
            .map(|v| {
                v.parse::<f64>()
                    .with_context(|| format!("bad k in header: {v}"))
            })
            .transpose()
    }
}

pub fn parse_shift_table(text: &str) -> anyhow::Result<ShiftTable> {
    let mut meta = BTreeMap::new();
    let mut body = String::new();
    for line in text.lines() {
        if let Some(comment) = line.trim_start().strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                meta.insert(key.trim().to_string(), value.trim().to_string());
            }
        } else if !line.trim().is_empty() {
            body.push_str(line);
            body.push('\n');
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let header = reader.headers().context("missing header row")?.clone();
    if header.iter().collect::<Vec<_>>() != ["l", "delta"] {
        bail!(
            "expected header `l,delta`, found `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        );
    }
    let mut shifts = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("row {}", row + 1))?;
        let l: usize = record[0]
            .parse()
            .with_context(|| format!("row {}: bad l `{}`", row + 1, &record[0]))?;
        if l != shifts.len() {
            bail!("row {}: expected l = {}, found {l}", row + 1, shifts.len());
        }
        let d: f64 = record[1]
            .parse()
            .with_context(|| format!("row {}: bad delta `{}`", row + 1, &record[1]))?;
        if !d.is_finite() {
            bail!("row {}: delta is not finite", row + 1);
        }
        shifts.push(d);
    }
    if shifts.is_empty() {
        bail!("shift table has no rows");
    }
    Ok(ShiftTable { meta, shifts })
}

/// Diameter matrix: one row per `k`, one column per `h`.
pub fn diameter_matrix(
    meta: &[(&str, String)],
    k_list: &[f64],
    h_list: &[f64],
    d: &[Vec<f64>],
) -> anyhow::Result<String> {
    let mut header = vec!["k".to_string()];
    header.extend(h_list.iter().map(|h| format!("h={}", num(*h))));
    let rows: Vec<Vec<String>> = k_list
        .iter()
        .zip(d)
        .map(|(k, row)| {
            std::iter::once(num(*k))
                .chain(row.iter().map(|x| num(*x)))
                .collect()
        })
        .collect();
    Ok(comment_block(meta) + &csv_body(&header, &rows)?)
}
