//! Nonconformity scores: one minus the probability assigned to a class.
//!
//! Calibration scores the true class of each sample; inference scores every
//! class. Both paths go through [`score_of`] so that a calibration score and
//! the matching inference score are bitwise identical.

use serde::{Deserialize, Serialize};

use crate::types::{Example, ProbVector};

/// A nonconformity score in `[0, 1]`. Lower means the class conforms better.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Score(pub f64);

impl Score {
    pub fn value(self) -> f64 {
        self.0
    }
}

#[inline]
fn score_of(p: f64) -> Score {
    Score(1.0 - p)
}

/// Score of the true class, `1 - probs[true_label]`.
///
/// Panics if `true_label` is out of range for `probs`.
pub fn true_class_score(probs: &ProbVector, true_label: usize) -> Score {
    score_of(probs.as_slice()[true_label])
}

/// Score of a labeled example; `None` when the label is unknown.
pub fn example_score(ex: &Example) -> Option<Score> {
    ex.true_label
        .map(|label| true_class_score(&ex.probs, label))
}

/// Scores for every class of one vector.
pub fn all_class_scores(probs: &ProbVector) -> Vec<Score> {
    probs.as_slice().iter().map(|&p| score_of(p)).collect()
}
