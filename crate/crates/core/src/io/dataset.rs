//! Probability dataset files.
//!
//! CSV: header `sample_id,true_label,p_0,...,p_{K-1}`, one sample per row.
//! JSONL: one `{"sample_id": ..., "true_label": ..., "probs": [...]}` per line.
//! In both, `true_label` is a class index or a class name and may be left
//! empty (CSV) or omitted (JSONL) for unlabeled samples.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{write_atomic, DataFormat, IoError};
use crate::types::{
    ClassUniverse, Dataset, Example, Issue, MassStatus, ProbVector, ValidationReport,
};

fn parse_err(line: u64, message: impl Into<String>) -> IoError {
    IoError::Parse {
        line,
        message: message.into(),
    }
}

/// Shared per-row checks: label resolution, dimension, probability policy, unique ids.
struct RowSink<'u> {
    universe: &'u ClassUniverse,
    ids: HashSet<String>,
    examples: Vec<Example>,
    warnings: Vec<Issue>,
}

impl<'u> RowSink<'u> {
    fn new(universe: &'u ClassUniverse) -> Self {
        Self {
            universe,
            ids: HashSet::new(),
            examples: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn resolve(&self, line: u64, token: &str) -> Result<usize, IoError> {
        self.universe
            .resolve(token)
            .ok_or_else(|| IoError::UnknownLabel {
                line,
                label: token.to_string(),
            })
    }

    fn push(
        &mut self,
        line: u64,
        sample_id: String,
        true_label: Option<usize>,
        probs: Vec<f64>,
    ) -> Result<(), IoError> {
        let k = self.universe.k();
        if probs.len() != k {
            return Err(IoError::DimensionMismatch {
                line,
                expected: k,
                found: probs.len(),
            });
        }
        let probs = ProbVector::new(probs);
        let status = probs.check().map_err(|reason| IoError::Invalid {
            line,
            sample_id: sample_id.clone(),
            reason,
        })?;
        if let MassStatus::RenormalizeWithWarning { sum } = status {
            log::warn!("line {line}: probability mass {sum} renormalized");
            self.warnings.push(Issue {
                sample_id: Some(sample_id.clone()),
                reason: format!("line {line}: probability mass {sum} renormalized"),
            });
        }
        if !self.ids.insert(sample_id.clone()) {
            return Err(IoError::Invalid {
                line,
                sample_id: sample_id.clone(),
                reason: format!("duplicate sample_id {sample_id:?}"),
            });
        }
        self.examples.push(Example {
            sample_id,
            true_label,
            probs: probs.apply(status),
        });
        Ok(())
    }

    fn finish(self) -> (Dataset, ValidationReport) {
        let report = ValidationReport {
            violations: Vec::new(),
            warnings: self.warnings,
        };
        (Dataset::new(self.universe.clone(), self.examples), report)
    }
}

fn csv_error(e: csv::Error) -> IoError {
    let line = e.position().map_or(0, |p| p.line());
    parse_err(line, e.to_string())
}

fn check_csv_header(headers: &csv::StringRecord, k: usize) -> Result<(), IoError> {
    if headers.get(0) != Some("sample_id") || headers.get(1) != Some("true_label") {
        return Err(parse_err(1, "header must start with sample_id,true_label"));
    }
    let prob_cols = headers.len().saturating_sub(2);
    for (i, name) in headers.iter().skip(2).enumerate() {
        if name != format!("p_{i}") {
            return Err(parse_err(
                1,
                format!("expected column p_{i}, found {name:?}"),
            ));
        }
    }
    if prob_cols != k {
        return Err(IoError::DimensionMismatch {
            line: 1,
            expected: k,
            found: prob_cols,
        });
    }
    Ok(())
}

/// Parses CSV from a reader against `universe`, applying the probability policy.
pub fn read_csv<R: Read>(
    reader: R,
    universe: &ClassUniverse,
) -> Result<(Dataset, ValidationReport), IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    check_csv_header(&headers, universe.k())?;
    let mut sink = RowSink::new(universe);
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() < 2 {
            return Err(parse_err(line, "missing sample_id or true_label field"));
        }
        let sample_id = record[0].to_string();
        if sample_id.is_empty() {
            return Err(parse_err(line, "empty sample_id"));
        }
        let label = match record[1].trim() {
            "" => None,
            token => Some(sink.resolve(line, token)?),
        };
        let probs = record
            .iter()
            .skip(2)
            .enumerate()
            .map(|(i, field)| {
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(line, format!("p_{i}: {field:?} is not a number")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        sink.push(line, sample_id, label, probs)?;
    }
    Ok(sink.finish())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LabelToken {
    Index(u64),
    Name(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRow {
    sample_id: String,
    #[serde(default)]
    true_label: Option<LabelToken>,
    probs: Vec<f64>,
}

#[derive(Serialize)]
struct JsonRowOut<'a> {
    sample_id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    true_label: Option<usize>,
    probs: &'a [f64],
}

/// Parses JSON lines from a reader against `universe`. Blank lines are skipped.
pub fn read_jsonl<R: BufRead>(
    reader: R,
    universe: &ClassUniverse,
) -> Result<(Dataset, ValidationReport), IoError> {
    let mut sink = RowSink::new(universe);
    for (i, text) in reader.lines().enumerate() {
        let line = i as u64 + 1;
        let text = text.map_err(|e| parse_err(line, e.to_string()))?;
        if text.trim().is_empty() {
            continue;
        }
        let row: JsonRow =
            serde_json::from_str(&text).map_err(|e| parse_err(line, e.to_string()))?;
        let label = match row.true_label {
            None => None,
            Some(LabelToken::Index(i)) => Some(sink.resolve(line, &i.to_string())?),
            Some(LabelToken::Name(name)) => Some(sink.resolve(line, &name)?),
        };
        sink.push(line, row.sample_id, label, row.probs)?;
    }
    Ok(sink.finish())
}

/// Loads a dataset file. Violations abort with the offending line number;
/// renormalization warnings are returned in the report.
pub fn load_probabilities(
    path: &Path,
    format: DataFormat,
    universe: &ClassUniverse,
) -> Result<(Dataset, ValidationReport), IoError> {
    let file = File::open(path).map_err(|e| IoError::io(path, e))?;
    match format {
        DataFormat::Csv => read_csv(file, universe),
        DataFormat::Jsonl => read_jsonl(BufReader::new(file), universe),
    }
}

/// Generic class universe sized from the file: the CSV header's `p_*` columns
/// or the first JSONL record's vector length.
pub fn infer_universe(path: &Path, format: DataFormat) -> Result<ClassUniverse, IoError> {
    let file = File::open(path).map_err(|e| IoError::io(path, e))?;
    let k = match format {
        DataFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new().from_reader(file);
            rdr.headers().map_err(csv_error)?.len().saturating_sub(2)
        }
        DataFormat::Jsonl => {
            let reader = BufReader::new(file);
            let mut k = None;
            for (i, text) in reader.lines().enumerate() {
                let line = i as u64 + 1;
                let text = text.map_err(|e| parse_err(line, e.to_string()))?;
                if text.trim().is_empty() {
                    continue;
                }
                let row: JsonRow =
                    serde_json::from_str(&text).map_err(|e| parse_err(line, e.to_string()))?;
                k = Some(row.probs.len());
                break;
            }
            k.ok_or_else(|| {
                IoError::Format(format!(
                    "{}: cannot infer the class count from an empty file; pass --classes",
                    path.display()
                ))
            })?
        }
    };
    Ok(ClassUniverse::generic(k)?)
}

pub fn write_csv(d: &Dataset) -> String {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["sample_id".to_string(), "true_label".to_string()];
    header.extend((0..d.k()).map(|i| format!("p_{i}")));
    wtr.write_record(&header).expect("in-memory write");
    for ex in &d.examples {
        let mut row = Vec::with_capacity(d.k() + 2);
        row.push(ex.sample_id.clone());
        row.push(ex.true_label.map(|l| l.to_string()).unwrap_or_default());
        row.extend(ex.probs.as_slice().iter().map(|p| p.to_string()));
        wtr.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn write_jsonl(d: &Dataset) -> String {
    let mut out = String::new();
    for ex in &d.examples {
        let row = JsonRowOut {
            sample_id: &ex.sample_id,
            true_label: ex.true_label,
            probs: ex.probs.as_slice(),
        };
        out.push_str(&serde_json::to_string(&row).expect("finite probabilities"));
        out.push('\n');
    }
    out
}

pub fn write_dataset(d: &Dataset, path: &Path, format: DataFormat) -> Result<(), IoError> {
    let text = match format {
        DataFormat::Csv => write_csv(d),
        DataFormat::Jsonl => write_jsonl(d),
    };
    write_atomic(path, text.as_bytes())
}
