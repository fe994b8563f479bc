//! Machine-readable reports: one CSV row per experiment case, RFC 4180
//! quoting, deterministic float formatting (shortest round-trip), complex
//! fibers flattened row-major into `re`/`im` column pairs.
//!
//! Timing is measured per row but excluded from the CSV by default so that
//! identical runs produce byte-identical files; `--timing` opts in.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::CliError;

#[derive(Debug, Clone)]
pub struct ReportRow {
    pub experiment: String,
    pub case: String,
    pub x: Vec<f64>,
    pub nodes: usize,
    pub steps: usize,
    pub value_inverted: Vec<Complex64>,
    pub value_direct: Vec<Complex64>,
    pub abs_error: f64,
    pub rel_error: f64,
    pub wall_time_ms: f64,
    pub status: String,
}

impl ReportRow {
    /// Max-norm of the difference of the value columns; `abs_error` must
    /// always equal this (checked on load).
    pub fn recompute_abs_error(&self) -> f64 {
        self.value_inverted
            .iter()
            .zip(&self.value_direct)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

pub fn rel_error(abs: f64, direct: &[Complex64]) -> f64 {
    let denom = direct.iter().map(|c| c.norm()).fold(0.0, f64::max);
    abs / denom.max(1e-12)
}

/// Write rows as CSV. All rows must share the point dimension and fiber
/// length; the header is derived from the first row.
pub fn write_csv(path: &Path, rows: &[ReportRow], with_timing: bool) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)?;
    let (dim, fiber) = rows
        .first()
        .map(|r| (r.x.len(), r.value_inverted.len()))
        .unwrap_or((0, 0));
    let mut header: Vec<String> = vec!["experiment".into(), "case".into()];
    for i in 0..dim {
        header.push(format!("x{i}"));
    }
    header.push("nodes".into());
    header.push("steps".into());
    for i in 0..fiber {
        header.push(format!("inv_re_{i}"));
        header.push(format!("inv_im_{i}"));
    }
    for i in 0..fiber {
        header.push(format!("dir_re_{i}"));
        header.push(format!("dir_im_{i}"));
    }
    header.push("abs_error".into());
    header.push("rel_error".into());
    header.push("status".into());
    if with_timing {
        header.push("wall_time_ms".into());
    }
    writer.write_record(&header)?;
    for row in rows {
        if row.x.len() != dim || row.value_inverted.len() != fiber {
            return Err(CliError::Config(
                "report rows have inconsistent shapes".into(),
            ));
        }
        let mut record: Vec<String> = vec![row.experiment.clone(), row.case.clone()];
        for c in &row.x {
            record.push(format!("{c}"));
        }
        record.push(format!("{}", row.nodes));
        record.push(format!("{}", row.steps));
        for v in &row.value_inverted {
            record.push(format!("{}", v.re));
            record.push(format!("{}", v.im));
        }
        for v in &row.value_direct {
            record.push(format!("{}", v.re));
            record.push(format!("{}", v.im));
        }
        record.push(format!("{}", row.abs_error));
        record.push(format!("{}", row.rel_error));
        record.push(row.status.clone());
        if with_timing {
            record.push(format!("{}", row.wall_time_ms));
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Load rows back and verify the `abs_error` column against the values.
pub fn read_csv(path: &Path) -> Result<Vec<ReportRow>, CliError> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let dim = header.iter().filter(|h| h.starts_with('x')).count();
    let fiber = header.iter().filter(|h| h.starts_with("inv_re_")).count();
    let with_timing = header.last().map(|h| h == "wall_time_ms").unwrap_or(false);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let get = |i: usize| -> Result<f64, CliError> {
            record
                .get(i)
                .ok_or_else(|| CliError::Config("short CSV record".into()))?
                .parse()
                .map_err(|e| CliError::Config(format!("bad float in CSV: {e}")))
        };
        let mut i = 2;
        let mut x = Vec::with_capacity(dim);
        for _ in 0..dim {
            x.push(get(i)?);
            i += 1;
        }
        let nodes = get(i)? as usize;
        i += 1;
        let steps = get(i)? as usize;
        i += 1;
        let mut value_inverted = Vec::with_capacity(fiber);
        for _ in 0..fiber {
            value_inverted.push(Complex64::new(get(i)?, get(i + 1)?));
            i += 2;
        }
        let mut value_direct = Vec::with_capacity(fiber);
        for _ in 0..fiber {
            value_direct.push(Complex64::new(get(i)?, get(i + 1)?));
            i += 2;
        }
        let abs_error = get(i)?;
        let rel = get(i + 1)?;
        let status = record.get(i + 2).unwrap_or("").to_string();
        let wall_time_ms = if with_timing { get(i + 3)? } else { 0.0 };
        let row = ReportRow {
            experiment: record.get(0).unwrap_or("").to_string(),
            case: record.get(1).unwrap_or("").to_string(),
            x,
            nodes,
            steps,
            value_inverted,
            value_direct,
            abs_error,
            rel_error: rel,
            wall_time_ms,
            status,
        };
        if row.status == "ok" {
            let recomputed = row.recompute_abs_error();
            // shortest round-trip formatting reproduces the bits exactly
            if (recomputed - row.abs_error).abs() > 1e-15 * (1.0 + row.abs_error) {
                return Err(CliError::Config(format!(
                    "abs_error column {} disagrees with recomputed {}",
                    row.abs_error, recomputed
                )));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Deterministic plain-text summary (no timing data).
pub fn write_summary(path: &Path, lines: &[String]) -> Result<(), CliError> {
    let mut file = std::fs::File::create(path)?;
    for line in lines {
        writeln!(file, "{line}")?;
    }
    Ok(())
}
