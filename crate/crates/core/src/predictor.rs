//! Conformal inference: turns probability vectors into prediction sets.
//!
//! Class `k` joins the set when its score `1 - p_k` is at or below the
//! calibrated threshold. Sets may be empty; an empty set means no class was
//! credible enough and is reported as such.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{CalibrationResult, Threshold};
use crate::scores::all_class_scores;
use crate::types::{Dataset, ProbVector};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredictError {
    #[error("sample {sample_id:?}: expected {expected} probabilities, found {found}")]
    DimensionMismatch {
        sample_id: String,
        expected: usize,
        found: usize,
    },
}

/// Candidate labels for one sample. Serialized as one JSON line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub sample_id: String,
    /// Ascending class indices.
    pub members: Vec<usize>,
    pub set_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_label: Option<usize>,
}

impl PredictionSet {
    pub fn contains(&self, class: usize) -> bool {
        self.members.binary_search(&class).is_ok()
    }
}

/// Members of the prediction set of `probs` under `threshold`.
pub fn set_members(probs: &ProbVector, threshold: Threshold) -> Vec<usize> {
    all_class_scores(probs)
        .into_iter()
        .enumerate()
        .filter(|&(_, s)| threshold.admits(s))
        .map(|(k, _)| k)
        .collect()
}

/// Prediction set for one sample whose vector must have `k` entries.
pub fn prediction_set(
    sample_id: &str,
    probs: &ProbVector,
    k: usize,
    threshold: Threshold,
) -> Result<PredictionSet, PredictError> {
    if probs.len() != k {
        return Err(PredictError::DimensionMismatch {
            sample_id: sample_id.to_string(),
            expected: k,
            found: probs.len(),
        });
    }
    let members = set_members(probs, threshold);
    Ok(PredictionSet {
        sample_id: sample_id.to_string(),
        set_size: members.len(),
        members,
        true_label: None,
    })
}

/// One prediction set per example, in input order. Known labels are carried through.
pub fn predict_batch(
    test: &Dataset,
    r: &CalibrationResult,
) -> Result<Vec<PredictionSet>, PredictError> {
    predict_with_threshold(test, r.threshold)
}

pub fn predict_with_threshold(
    test: &Dataset,
    threshold: Threshold,
) -> Result<Vec<PredictionSet>, PredictError> {
    let k = test.k();
    test.examples
        .iter()
        .map(|ex| {
            let mut set = prediction_set(&ex.sample_id, &ex.probs, k, threshold)?;
            set.true_label = ex.true_label;
            Ok(set)
        })
        .collect()
}

/// Point prediction: the most probable class, lowest index on ties.
pub fn argmax_class(probs: &ProbVector) -> usize {
    let mut best = 0;
    for (i, &p) in probs.as_slice().iter().enumerate().skip(1) {
        if p > probs.as_slice()[best] {
            best = i;
        }
    }
    best
}
