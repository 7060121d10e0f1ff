//! Evaluation of prediction sets and point predictions.
//!
//! Two coverage notions are reported side by side:
//!
//! * **strict coverage**: the set is exactly `{true label}`. A correct
//!   singleton is the only outcome counted as a confident correct prediction.
//! * **marginal coverage**: the set contains the true label, whatever its
//!   size. This is the quantity the conformal guarantee bounds below by
//!   `1 - alpha`.
//!
//! Everything is accumulated in integer counters and divided once at the end,
//! so results do not depend on sample order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::predictor::{argmax_class, PredictionSet};
use crate::types::Dataset;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("{sets} prediction sets but {labels} labels")]
    LengthMismatch { sets: usize, labels: usize },
    #[error("nothing to evaluate")]
    EmptyDataset,
    #[error("sample {0:?} has no true label")]
    MissingLabel(String),
    #[error("label {label} outside [0, {k})")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("row {position}: prediction for {found:?} does not match sample {expected:?}")]
    SampleMismatch {
        position: usize,
        expected: String,
        found: String,
    },
}

/// A rate per true class (`None` when the class has no samples) and overall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRates {
    pub per_class: Vec<Option<f64>>,
    pub overall: f64,
}

#[derive(Debug, Clone, Default)]
struct Tally {
    count: Vec<u64>,
    strict: Vec<u64>,
    marginal: Vec<u64>,
    size_sum: Vec<u64>,
}

impl Tally {
    fn new(sets: &[PredictionSet], labels: &[usize], k: usize) -> Result<Self, MetricsError> {
        if sets.len() != labels.len() {
            return Err(MetricsError::LengthMismatch {
                sets: sets.len(),
                labels: labels.len(),
            });
        }
        if sets.is_empty() {
            return Err(MetricsError::EmptyDataset);
        }
        let mut t = Tally {
            count: vec![0; k],
            strict: vec![0; k],
            marginal: vec![0; k],
            size_sum: vec![0; k],
        };
        for (set, &label) in sets.iter().zip(labels) {
            if label >= k {
                return Err(MetricsError::LabelOutOfRange { label, k });
            }
            t.count[label] += 1;
            t.size_sum[label] += set.set_size as u64;
            if set.contains(label) {
                t.marginal[label] += 1;
                if set.set_size == 1 {
                    t.strict[label] += 1;
                }
            }
        }
        Ok(t)
    }

    fn total(&self) -> u64 {
        self.count.iter().sum()
    }

    fn rates(&self, numerators: &[u64]) -> ClassRates {
        let per_class = numerators
            .iter()
            .zip(&self.count)
            .map(|(&num, &den)| (den > 0).then(|| num as f64 / den as f64))
            .collect();
        let overall = numerators.iter().sum::<u64>() as f64 / self.total() as f64;
        ClassRates { per_class, overall }
    }
}

fn class_count(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |&m| m + 1)
}

/// Fraction of samples whose set is exactly the singleton true label.
pub fn strict_coverage(
    sets: &[PredictionSet],
    labels: &[usize],
    k: usize,
) -> Result<ClassRates, MetricsError> {
    let t = Tally::new(sets, labels, k)?;
    Ok(t.rates(&t.strict))
}

/// Fraction of samples whose set contains the true label.
pub fn marginal_coverage(sets: &[PredictionSet], labels: &[usize]) -> Result<f64, MetricsError> {
    let t = Tally::new(sets, labels, class_count(labels))?;
    Ok(t.rates(&t.marginal).overall)
}

/// Mean set size per true class and overall.
pub fn avg_set_size(
    sets: &[PredictionSet],
    labels: &[usize],
    k: usize,
) -> Result<ClassRates, MetricsError> {
    let t = Tally::new(sets, labels, k)?;
    Ok(t.rates(&t.size_sum))
}

/// How many sets have each size. Sizes other than 1 are "uncertain".
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetSizeHistogram {
    pub counts: BTreeMap<usize, u64>,
    pub uncertain_total: u64,
}

impl SetSizeHistogram {
    /// Σ size · count.
    pub fn total_size(&self) -> u64 {
        self.counts.iter().map(|(&s, &c)| s as u64 * c).sum()
    }

    pub fn total_sets(&self) -> u64 {
        self.counts.values().sum()
    }
}

pub fn uncertain_histogram(sets: &[PredictionSet]) -> SetSizeHistogram {
    let mut counts = BTreeMap::new();
    for set in sets {
        *counts.entry(set.set_size).or_insert(0u64) += 1;
    }
    let uncertain_total = counts
        .iter()
        .filter(|(&size, _)| size != 1)
        .map(|(_, &c)| c)
        .sum();
    SetSizeHistogram {
        counts,
        uncertain_total,
    }
}

/// Rows are true classes, columns argmax-predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        Self {
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub confusion: ConfusionMatrix,
    pub per_class_recall: Vec<Option<f64>>,
    pub accuracy: f64,
}

/// Confusion matrix, per-class recall and accuracy of argmax predictions.
pub fn confusion_and_recall(d: &Dataset) -> Result<PointMetrics, MetricsError> {
    if d.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let k = d.k();
    let mut confusion = ConfusionMatrix::zeros(k);
    for ex in &d.examples {
        let label = ex
            .true_label
            .ok_or_else(|| MetricsError::MissingLabel(ex.sample_id.clone()))?;
        if label >= k {
            return Err(MetricsError::LabelOutOfRange { label, k });
        }
        confusion.counts[label][argmax_class(&ex.probs)] += 1;
    }
    let per_class_recall = confusion
        .row_sums()
        .iter()
        .enumerate()
        .map(|(i, &row)| (row > 0).then(|| confusion.counts[i][i] as f64 / row as f64))
        .collect();
    let accuracy = confusion.trace() as f64 / confusion.total() as f64;
    Ok(PointMetrics {
        confusion,
        per_class_recall,
        accuracy,
    })
}

/// Every evaluation quantity for one test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub class_names: Vec<String>,
    pub n_test: u64,
    pub class_counts: Vec<u64>,
    pub per_class_recall: Vec<Option<f64>>,
    pub accuracy: f64,
    pub per_class_strict_coverage: Vec<Option<f64>>,
    pub overall_strict_coverage: f64,
    pub per_class_marginal_coverage: Vec<Option<f64>>,
    pub marginal_coverage: f64,
    pub per_class_avg_set_size: Vec<Option<f64>>,
    pub overall_avg_set_size: f64,
    pub total_set_size: u64,
    pub uncertain_counts: SetSizeHistogram,
    pub confusion: ConfusionMatrix,
}

/// Builds the full report from a labeled test set and its prediction sets.
///
/// `sets` must align with `test.examples` by position and sample id.
pub fn evaluate(test: &Dataset, sets: &[PredictionSet]) -> Result<EvaluationReport, MetricsError> {
    if sets.len() != test.len() {
        return Err(MetricsError::LengthMismatch {
            sets: sets.len(),
            labels: test.len(),
        });
    }
    let mut labels = Vec::with_capacity(test.len());
    for (position, (ex, set)) in test.examples.iter().zip(sets).enumerate() {
        if ex.sample_id != set.sample_id {
            return Err(MetricsError::SampleMismatch {
                position,
                expected: ex.sample_id.clone(),
                found: set.sample_id.clone(),
            });
        }
        labels.push(
            ex.true_label
                .ok_or_else(|| MetricsError::MissingLabel(ex.sample_id.clone()))?,
        );
    }
    let k = test.k();
    let tally = Tally::new(sets, &labels, k)?;
    let point = confusion_and_recall(test)?;
    let strict = tally.rates(&tally.strict);
    let marginal = tally.rates(&tally.marginal);
    let sizes = tally.rates(&tally.size_sum);
    Ok(EvaluationReport {
        class_names: test.universe.names().map(str::to_string).collect(),
        n_test: tally.total(),
        class_counts: tally.count.clone(),
        per_class_recall: point.per_class_recall,
        accuracy: point.accuracy,
        per_class_strict_coverage: strict.per_class,
        overall_strict_coverage: strict.overall,
        per_class_marginal_coverage: marginal.per_class,
        marginal_coverage: marginal.overall,
        per_class_avg_set_size: sizes.per_class,
        overall_avg_set_size: sizes.overall,
        total_set_size: tally.size_sum.iter().sum(),
        uncertain_counts: uncertain_histogram(sets),
        confusion: point.confusion,
    })
}
