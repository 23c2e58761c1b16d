//! CSV ingestion and report emission.

use crate::error::{Error, Result};
use crate::experiments::BandwidthCurve;
use crate::exponents::ExponentEstimate;
use crate::sample::Sample;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// Loads a rectangular numeric CSV into a Sample. Rejects ragged rows,
/// non-numeric cells, and non-finite values, naming the offending cell
/// (1-based data row and column).
pub fn load_csv(path: &Path, header: bool) -> Result<Sample<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut data: Vec<f64> = Vec::new();
    let mut dim: Option<usize> = None;
    let mut rows = 0usize;
    for (ri, record) in reader.records().enumerate() {
        let record = record?;
        let row = ri + 1;
        let width = record.len();
        if width == 0 || (width == 1 && record.get(0) == Some("")) {
            continue; // blank line
        }
        match dim {
            None => dim = Some(width),
            Some(d) if d != width => {
                return Err(Error::Ingestion {
                    row,
                    col: width,
                    reason: format!("ragged row: expected {d} columns, found {width}"),
                })
            }
            _ => {}
        }
        for (ci, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| Error::Ingestion {
                row,
                col: ci + 1,
                reason: format!("non-numeric cell '{cell}'"),
            })?;
            if !value.is_finite() {
                return Err(Error::Ingestion {
                    row,
                    col: ci + 1,
                    reason: format!("non-finite value '{cell}'"),
                });
            }
            data.push(value);
        }
        rows += 1;
    }
    let dim = dim.ok_or(Error::Ingestion {
        row: 0,
        col: 0,
        reason: "file contains no data rows".into(),
    })?;
    debug_assert_eq!(data.len(), rows * dim);
    Sample::from_vec(data, dim)
}

/// Serializes `value` as pretty JSON to `path`, or stdout when absent.
pub fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidParam(format!("serialization failed: {e}")))?;
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn write_text(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Exponent curve as CSV: size, beta_hat, se, minus_log_beta_over_size
/// (last column empty on censored points).
pub fn emit_exponent_csv(est: &ExponentEstimate, path: Option<&Path>) -> Result<()> {
    let mut text = String::from("size,beta_hat,se,minus_log_beta_over_size\n");
    for p in &est.points {
        let rate = p
            .minus_log_beta_over_size
            .map(|v| v.to_string())
            .unwrap_or_default();
        text.push_str(&format!("{},{},{},{}\n", p.size, p.beta_hat, p.se, rate));
    }
    write_text(&text, path)
}

/// Bandwidth sweep as CSV: gamma, type2_rate, se; rows sorted by gamma.
pub fn emit_bandwidth_csv(curve: &BandwidthCurve, path: Option<&Path>) -> Result<()> {
    let mut text = String::from("gamma,type2_rate,se\n");
    for i in 0..curve.bandwidths.len() {
        text.push_str(&format!(
            "{},{},{}\n",
            curve.bandwidths[i], curve.type2_rate[i], curve.se[i]
        ));
    }
    write_text(&text, path)
}
