//! Shared domain types: the class universe, probability vectors, labeled
//! examples and datasets, plus dataset validation.
//!
//! Class labels are dense zero-based indices everywhere inside the crate.
//! Names only matter at the edges (file loading and report rendering).
//!
//! Probability vectors are stored as read. [`validate_dataset`] reports every
//! problem without aborting, and [`Dataset::normalized`] applies the
//! renormalization policy:
//!
//! | `|sum - 1|`            | action                          |
//! |------------------------|---------------------------------|
//! | ≤ 1e-12                | left untouched                  |
//! | ≤ 1e-6                 | divided by the sum              |
//! | ≤ 1e-3                 | divided by the sum, warning     |
//! | larger, or NaN/inf     | violation                       |

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Deviations from unit mass at or below this are floating-point summation
/// noise and are not touched, so normalization is idempotent.
pub const NORMALIZED_EPS: f64 = 1e-12;
/// Silent renormalization bound.
pub const MASS_TOLERANCE: f64 = 1e-6;
/// Renormalization with a warning up to this bound; beyond it the vector is rejected.
pub const MASS_WARN_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UniverseError {
    #[error("a class universe needs at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("duplicate class name {0:?}")]
    DuplicateName(String),
    #[error(
        "class at position {position} has index {index}; indices must be dense and zero-based"
    )]
    NonDenseIndex { position: usize, index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLabel {
    pub index: usize,
    pub name: String,
}

/// The ordered set of classes a classifier can output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ClassLabel>", into = "Vec<ClassLabel>")]
pub struct ClassUniverse {
    labels: Vec<ClassLabel>,
}

impl ClassUniverse {
    pub fn from_labels(labels: Vec<ClassLabel>) -> Result<Self, UniverseError> {
        if labels.len() < 2 {
            return Err(UniverseError::TooFewClasses(labels.len()));
        }
        let mut names = HashSet::with_capacity(labels.len());
        for (position, label) in labels.iter().enumerate() {
            if label.index != position {
                return Err(UniverseError::NonDenseIndex {
                    position,
                    index: label.index,
                });
            }
            if !names.insert(label.name.as_str()) {
                return Err(UniverseError::DuplicateName(label.name.clone()));
            }
        }
        Ok(Self { labels })
    }

    pub fn from_names<I, S>(names: I) -> Result<Self, UniverseError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels = names
            .into_iter()
            .enumerate()
            .map(|(index, name)| ClassLabel {
                index,
                name: name.into(),
            })
            .collect();
        Self::from_labels(labels)
    }

    /// Classes named `class_0`, `class_1`, ...
    pub fn generic(k: usize) -> Result<Self, UniverseError> {
        Self::from_names((0..k).map(|i| format!("class_{i}")))
    }

    /// The nine ferrous scrap grades used as the reference class set.
    pub fn ferrous_scrap() -> Self {
        Self::from_names([
            "Steel Sheets",
            "Stamping Scrap",
            "Swarf Scrap",
            "High-Quality Oxyfuel Cutting Scrap",
            "Low-Quality Oxyfuel Cutting Scrap",
            "Shredder",
            "Sheared Scrap",
            "High-Quality Packages",
            "Low-Quality Packages",
        ])
        .expect("static class list is valid")
    }

    /// Number of classes, K.
    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(|l| l.name.as_str())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(|l| l.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.name == name)
    }

    /// Resolves a label token: a decimal index in range, or an exact class name.
    pub fn resolve(&self, token: &str) -> Option<usize> {
        match token.parse::<usize>() {
            Ok(i) if i < self.k() => Some(i),
            Ok(_) => None,
            Err(_) => self.index_of(token),
        }
    }

    /// SHA-256 over the ordered class names; identifies a universe across files.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for label in &self.labels {
            hasher.update(label.name.as_bytes());
            hasher.update([0u8]);
        }
        hex::encode(hasher.finalize())
    }
}

impl TryFrom<Vec<ClassLabel>> for ClassUniverse {
    type Error = UniverseError;

    fn try_from(labels: Vec<ClassLabel>) -> Result<Self, Self::Error> {
        Self::from_labels(labels)
    }
}

impl From<ClassUniverse> for Vec<ClassLabel> {
    fn from(u: ClassUniverse) -> Self {
        u.labels
    }
}

/// Outcome of checking a vector's total probability mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MassStatus {
    /// Sum is 1 up to summation noise.
    Normalized,
    /// Within tolerance; divide by `sum`.
    Renormalize { sum: f64 },
    /// Off by more than the silent tolerance but still accepted.
    RenormalizeWithWarning { sum: f64 },
}

/// Class probabilities for one sample, as emitted by a classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    /// Uniform distribution over `k` classes.
    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    /// All mass on `index`.
    pub fn one_hot(k: usize, index: usize) -> Self {
        let mut probs = vec![0.0; k];
        probs[index] = 1.0;
        Self(probs)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn mass(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Checks entries and total mass; `Err` carries a human-readable reason.
    pub fn check(&self) -> Result<MassStatus, String> {
        if self.0.is_empty() {
            return Err("empty probability vector".to_string());
        }
        for (i, &p) in self.0.iter().enumerate() {
            if !p.is_finite() {
                return Err(format!("non-finite probability {p} at class {i}"));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("probability {p} at class {i} outside [0, 1]"));
            }
        }
        let sum = self.mass();
        let dev = (sum - 1.0).abs();
        if dev <= NORMALIZED_EPS {
            Ok(MassStatus::Normalized)
        } else if dev <= MASS_TOLERANCE {
            Ok(MassStatus::Renormalize { sum })
        } else if dev <= MASS_WARN_TOLERANCE {
            Ok(MassStatus::RenormalizeWithWarning { sum })
        } else {
            Err(format!("probability mass {sum} outside tolerance"))
        }
    }

    /// Applies the renormalization policy for an already-checked status.
    pub fn apply(self, status: MassStatus) -> Self {
        match status {
            MassStatus::Normalized => self,
            MassStatus::Renormalize { sum } | MassStatus::RenormalizeWithWarning { sum } => {
                Self(self.0.into_iter().map(|p| p / sum).collect())
            }
        }
    }
}

/// One sample: identifier, true label when known, classifier probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub sample_id: String,
    pub true_label: Option<usize>,
    pub probs: ProbVector,
}

impl Example {
    pub fn labeled(sample_id: impl Into<String>, true_label: usize, probs: ProbVector) -> Self {
        Self {
            sample_id: sample_id.into(),
            true_label: Some(true_label),
            probs,
        }
    }

    pub fn unlabeled(sample_id: impl Into<String>, probs: ProbVector) -> Self {
        Self {
            sample_id: sample_id.into(),
            true_label: None,
            probs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub universe: ClassUniverse,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn new(universe: ClassUniverse, examples: Vec<Example>) -> Self {
        Self { universe, examples }
    }

    pub fn empty(universe: ClassUniverse) -> Self {
        Self::new(universe, Vec::new())
    }

    pub fn k(&self) -> usize {
        self.universe.k()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// All true labels, or `None` if any example is unlabeled.
    pub fn labels(&self) -> Option<Vec<usize>> {
        self.examples.iter().map(|e| e.true_label).collect()
    }

    /// Validates and applies the renormalization policy.
    ///
    /// Returns the normalized dataset with any warnings, or the full report
    /// when there is at least one violation.
    pub fn normalized(self) -> Result<(Dataset, ValidationReport), ValidationReport> {
        let report = validate_dataset(&self);
        if !report.is_valid() {
            return Err(report);
        }
        let Dataset { universe, examples } = self;
        let examples = examples
            .into_iter()
            .map(|mut ex| {
                // validated above
                let status = ex.probs.check().expect("validated");
                ex.probs = ex.probs.apply(status);
                ex
            })
            .collect();
        Ok((Dataset { universe, examples }, report))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub sample_id: Option<String>,
    pub reason: String,
}

impl std::fmt::Display for Issue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.sample_id {
            Some(id) => write!(f, "sample {id:?}: {}", self.reason),
            None => f.write_str(&self.reason),
        }
    }
}

/// Every invariant violation found in a dataset, plus non-fatal warnings.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} violation(s)", self.violations.len())?;
        for issue in self.violations.iter().take(5) {
            write!(f, "; {issue}")?;
        }
        if self.violations.len() > 5 {
            write!(f, "; ...")?;
        }
        Ok(())
    }
}

/// Reports every invariant violation in `d`. Never aborts.
pub fn validate_dataset(d: &Dataset) -> ValidationReport {
    let k = d.k();
    let mut report = ValidationReport::default();
    let mut seen = HashSet::with_capacity(d.len());
    for ex in &d.examples {
        let issue = |reason: String| Issue {
            sample_id: Some(ex.sample_id.clone()),
            reason,
        };
        if !seen.insert(ex.sample_id.as_str()) {
            report
                .violations
                .push(issue(format!("duplicate sample_id {:?}", ex.sample_id)));
        }
        if let Some(label) = ex.true_label {
            if label >= k {
                report
                    .violations
                    .push(issue(format!("true label {label} outside [0, {k})")));
            }
        }
        if ex.probs.len() != k {
            report.violations.push(issue(format!(
                "expected {k} probabilities, found {}",
                ex.probs.len()
            )));
            continue;
        }
        match ex.probs.check() {
            Ok(MassStatus::RenormalizeWithWarning { sum }) => report
                .warnings
                .push(issue(format!("probability mass {sum} renormalized"))),
            Ok(_) => {}
            Err(reason) => report.violations.push(issue(reason)),
        }
    }
    report
}
