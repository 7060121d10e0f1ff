//! Split conformal prediction for multiclass classifiers.
//!
//! The crate treats a classifier as an opaque source of probability vectors.
//! From a labeled calibration split it derives a nonconformity threshold
//! ([`calibration`]), turns test vectors into prediction sets
//! ([`predictor`]), and evaluates them ([`metrics`]). A synthetic probability
//! source ([`synth`]) checks the coverage guarantee end to end.
//!
//! ```
//! use conformal_gate::{calibrate, generate, predict_batch, marginal_coverage, Alpha, SyntheticSpec};
//!
//! let spec = SyntheticSpec::default();
//! let calib = generate(&spec.with_seed(1), 500).unwrap();
//! let test = generate(&spec.with_seed(2), 2000).unwrap();
//! let result = calibrate(&calib, Alpha::new(0.1).unwrap()).unwrap();
//! let sets = predict_batch(&test, &result).unwrap();
//! let coverage = marginal_coverage(&sets, &test.labels().unwrap()).unwrap();
//! assert!(coverage > 0.85);
//! ```

pub mod calibration;
pub mod cli;
pub mod io;
pub mod metrics;
pub mod predictor;
pub mod rng;
pub mod scores;
pub mod synth;
pub mod types;

pub use calibration::{
    calibrate, calibrate_scores, export_calibration_curve, quantile_level, quantile_rank, Alpha,
    CalibrationError, CalibrationResult, CurveData, Threshold,
};
pub use metrics::{
    avg_set_size, confusion_and_recall, evaluate, marginal_coverage, strict_coverage,
    uncertain_histogram, ConfusionMatrix, EvaluationReport, MetricsError, SetSizeHistogram,
};
pub use predictor::{argmax_class, predict_batch, prediction_set, PredictError, PredictionSet};
pub use scores::{all_class_scores, true_class_score, Score};
pub use synth::{coverage_trial, generate, SynthError, SyntheticSpec, TrialSummary};
pub use types::{
    validate_dataset, ClassLabel, ClassUniverse, Dataset, Example, ProbVector, ValidationReport,
};
