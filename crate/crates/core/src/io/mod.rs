//! File formats: probability datasets (CSV / JSONL), class lists, seeded
//! splits, and evaluation reports.

mod dataset;
mod report;
mod split;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::types::{ClassUniverse, UniverseError};

pub use dataset::{
    infer_universe, load_probabilities, read_csv, read_jsonl, write_csv, write_dataset, write_jsonl,
};
pub use report::{
    read_report_json, report_csv, report_json, write_report, ReportFormat, REPORT_CSV_HEADER,
};
pub use split::{apportion, split, SplitOutcome, SplitSpec};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: unknown class label {label:?}")]
    UnknownLabel { line: u64, label: String },
    #[error("line {line}: expected {expected} probabilities, found {found}")]
    DimensionMismatch {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: sample {sample_id:?}: {reason}")]
    Invalid {
        line: u64,
        sample_id: String,
        reason: String,
    },
    #[error("invalid class list: {0}")]
    Universe(#[from] UniverseError),
    #[error("invalid split: {0}")]
    Split(String),
    #[error("{0}")]
    Format(String),
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// True for problems with file contents, false for filesystem failures.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, IoError::Io { .. })
    }
}

/// Dataset file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DataFormat {
    Csv,
    Jsonl,
}

impl DataFormat {
    /// `.jsonl` / `.json` / `.ndjson` are JSON lines, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "json" | "ndjson") => DataFormat::Jsonl,
            _ => DataFormat::Csv,
        }
    }
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IoError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| IoError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| IoError::io(path, e))?;
    tmp.persist(path).map_err(|e| IoError::io(path, e.error))?;
    Ok(())
}

/// Hex SHA-256 of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Reads a `classes.json` list: `[{"index": 0, "name": "..."}, ...]`.
pub fn read_classes(path: &Path) -> Result<ClassUniverse, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::Parse {
        line: e.line() as u64,
        message: e.to_string(),
    })
}

pub fn write_classes(universe: &ClassUniverse, path: &Path) -> Result<(), IoError> {
    let mut json = serde_json::to_string_pretty(universe).expect("class list serializes");
    json.push('\n');
    write_atomic(path, json.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("classes.json");
        let u = ClassUniverse::ferrous_scrap();
        write_classes(&u, &path).unwrap();
        assert_eq!(read_classes(&path).unwrap(), u);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(
            DataFormat::from_path(Path::new("a.jsonl")),
            DataFormat::Jsonl
        );
        assert_eq!(DataFormat::from_path(Path::new("a.csv")), DataFormat::Csv);
        assert_eq!(DataFormat::from_path(Path::new("a")), DataFormat::Csv);
    }
}
