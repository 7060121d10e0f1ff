//! Evaluation report rendering.
//!
//! CSV is one table: one row per class plus a final `Overall` row, rates to
//! four decimals, `n/a` for classes absent from the test data. In the
//! `Overall` row the recall column holds accuracy. JSON is the full
//! [`EvaluationReport`] at full precision.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{write_atomic, IoError};
use crate::metrics::EvaluationReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

pub const REPORT_CSV_HEADER: &str = "class,recall,coverage,avg_set_size,marginal_coverage,support";

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.4}"),
        None => "n/a".to_string(),
    }
}

fn csv_name(name: &str) -> String {
    if name.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", name.replace('"', "\"\""))
    } else {
        name.to_string()
    }
}

pub fn report_csv(r: &EvaluationReport) -> String {
    let mut out = String::new();
    out.push_str(REPORT_CSV_HEADER);
    out.push('\n');
    for (i, name) in r.class_names.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            csv_name(name),
            cell(r.per_class_recall[i]),
            cell(r.per_class_strict_coverage[i]),
            cell(r.per_class_avg_set_size[i]),
            cell(r.per_class_marginal_coverage[i]),
            r.class_counts[i]
        );
    }
    let _ = writeln!(
        out,
        "Overall,{},{},{},{},{}",
        cell(Some(r.accuracy)),
        cell(Some(r.overall_strict_coverage)),
        cell(Some(r.overall_avg_set_size)),
        cell(Some(r.marginal_coverage)),
        r.n_test
    );
    out
}

pub fn report_json(r: &EvaluationReport) -> String {
    let mut s = serde_json::to_string_pretty(r).expect("report serializes");
    s.push('\n');
    s
}

pub fn write_report(
    r: &EvaluationReport,
    path: &Path,
    format: ReportFormat,
) -> Result<(), IoError> {
    let text = match format {
        ReportFormat::Json => report_json(r),
        ReportFormat::Csv => report_csv(r),
    };
    write_atomic(path, text.as_bytes())
}

pub fn read_report_json(path: &Path) -> Result<EvaluationReport, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::Parse {
        line: e.line() as u64,
        message: e.to_string(),
    })
}
