//! Split conformal calibration.
//!
//! Given `n` calibration scores and a miscoverage rate `alpha`, the threshold
//! is the `ceil((1 - alpha)(n + 1))`-th smallest score (1-based). When that rank
//! exceeds `n` no finite score gives the target coverage, and the threshold is
//! [`Threshold::AllInclusive`]: every class enters every prediction set.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scores::{example_score, Score};
use crate::types::{validate_dataset, Dataset, ValidationReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),
    #[error("calibration set is empty")]
    EmptyCalibration,
    #[error("calibration sample {0:?} has no true label")]
    MissingLabel(String),
    #[error("non-finite calibration score {0}")]
    NonFiniteScore(f64),
    #[error("invalid calibration data: {0}")]
    InvalidDataset(ValidationReport),
}

/// Miscoverage rate; the target coverage is `1 - alpha`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self, CalibrationError> {
        if value.is_finite() && value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(CalibrationError::InvalidAlpha(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn coverage(self) -> f64 {
        1.0 - self.0
    }
}

impl Default for Alpha {
    fn default() -> Self {
        Self(0.05)
    }
}

impl TryFrom<f64> for Alpha {
    type Error = CalibrationError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> Self {
        a.0
    }
}

/// Conformal threshold on nonconformity scores.
///
/// Serializes as a JSON number or the string `"all_inclusive"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Finite(f64),
    AllInclusive,
}

impl Threshold {
    /// The threshold as a real number, `+inf` for the sentinel.
    pub fn upper_bound(self) -> f64 {
        match self {
            Threshold::Finite(t) => t,
            Threshold::AllInclusive => f64::INFINITY,
        }
    }

    pub fn is_all_inclusive(self) -> bool {
        matches!(self, Threshold::AllInclusive)
    }

    /// Inclusion test: a score at or below the threshold is admitted.
    #[inline]
    pub fn admits(self, score: Score) -> bool {
        match self {
            Threshold::Finite(t) => score.0 <= t,
            Threshold::AllInclusive => true,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Finite(t) => write!(f, "{t}"),
            Threshold::AllInclusive => f.write_str("all_inclusive"),
        }
    }
}

const ALL_INCLUSIVE: &str = "all_inclusive";

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Threshold::Finite(t) => serializer.serialize_f64(*t),
            Threshold::AllInclusive => serializer.serialize_str(ALL_INCLUSIVE),
        }
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Number(t) => Ok(Threshold::Finite(t)),
            Repr::Text(s) if s == ALL_INCLUSIVE => Ok(Threshold::AllInclusive),
            Repr::Text(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"{ALL_INCLUSIVE}\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub alpha: Alpha,
    pub n: usize,
    /// `(1 - alpha)(n + 1) / n`; exceeds 1 for small `n`.
    pub qlevel: f64,
    /// 1-based rank of the threshold in `sorted_scores`; `> n` means all-inclusive.
    pub rank: usize,
    pub sorted_scores: Vec<f64>,
    pub threshold: Threshold,
}

/// Finite-sample corrected quantile level `(1 - alpha)(n + 1) / n`.
pub fn quantile_level(n: usize, alpha: Alpha) -> Result<f64, CalibrationError> {
    if n == 0 {
        return Err(CalibrationError::EmptyCalibration);
    }
    Ok((1.0 - alpha.value()) * (n as f64 + 1.0) / n as f64)
}

/// 1-based rank `ceil(qlevel * n)` of the threshold among the sorted scores.
///
/// Computed as `ceil((1 - alpha)(n + 1))`. Products that land within 1e-9
/// (relative) of an integer are snapped to it first, so decimal rates such as
/// 0.05 give the exact-arithmetic rank rather than one past it.
pub fn quantile_rank(n: usize, alpha: Alpha) -> Result<usize, CalibrationError> {
    if n == 0 {
        return Err(CalibrationError::EmptyCalibration);
    }
    let target = alpha.coverage() * (n as f64 + 1.0);
    let nearest = target.round();
    let rank = if (target - nearest).abs() <= 1e-9 * target.max(1.0) {
        nearest
    } else {
        target.ceil()
    };
    Ok((rank as usize).max(1))
}

/// Calibrates directly from nonconformity scores.
pub fn calibrate_scores(
    mut scores: Vec<f64>,
    alpha: Alpha,
) -> Result<CalibrationResult, CalibrationError> {
    let n = scores.len();
    let qlevel = quantile_level(n, alpha)?;
    let rank = quantile_rank(n, alpha)?;
    if let Some(&bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(CalibrationError::NonFiniteScore(bad));
    }
    scores.sort_unstable_by(f64::total_cmp);
    let threshold = if rank > n {
        Threshold::AllInclusive
    } else {
        Threshold::Finite(scores[rank - 1])
    };
    Ok(CalibrationResult {
        alpha,
        n,
        qlevel,
        rank,
        sorted_scores: scores,
        threshold,
    })
}

/// Calibrates a threshold from a labeled, valid calibration dataset.
pub fn calibrate(calib: &Dataset, alpha: Alpha) -> Result<CalibrationResult, CalibrationError> {
    if calib.is_empty() {
        return Err(CalibrationError::EmptyCalibration);
    }
    let report = validate_dataset(calib);
    if !report.is_valid() {
        return Err(CalibrationError::InvalidDataset(report));
    }
    let scores = calib
        .examples
        .iter()
        .map(|ex| {
            example_score(ex)
                .map(Score::value)
                .ok_or_else(|| CalibrationError::MissingLabel(ex.sample_id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    calibrate_scores(scores, alpha)
}

/// Sorted calibration scores with the threshold line, ready for plotting.
///
/// Ranks are 1-based, so a finite threshold is the score at `CalibrationResult::rank`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveData {
    pub points: Vec<(usize, f64)>,
    pub threshold: Threshold,
    pub qlevel: f64,
    pub n: usize,
    pub alpha: Alpha,
}

pub fn export_calibration_curve(r: &CalibrationResult) -> CurveData {
    CurveData {
        points: (1..).zip(r.sorted_scores.iter().copied()).collect(),
        threshold: r.threshold,
        qlevel: r.qlevel,
        n: r.n,
        alpha: r.alpha,
    }
}

impl CurveData {
    /// `rank,score` rows and a trailing `threshold,<value|inf>` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,score\n");
        for (rank, score) in &self.points {
            out.push_str(&format!("{rank},{score}\n"));
        }
        match self.threshold {
            Threshold::Finite(t) => out.push_str(&format!("threshold,{t}\n")),
            Threshold::AllInclusive => out.push_str("threshold,inf\n"),
        }
        out
    }
}
