//! Synthetic classifier outputs with a known generative process.
//!
//! Each sample draws a label from the class prior. The simulated classifier
//! then concentrates its mass on a focus class. The focus is the true label
//! with probability `1 - noise`, otherwise a uniformly chosen wrong class. The
//! probability vector is built from independent unit-rate exponential
//! variates, one per class. The focus variate is scaled by `1 + sharpness`
//! and the result is normalized to sum 1.
//!
//! Calibration and test draws come from the same process, so they are
//! exchangeable and the conformal guarantee applies exactly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{calibrate, Alpha, CalibrationError};
use crate::metrics::{marginal_coverage, MetricsError};
use crate::predictor::{predict_batch, PredictError};
use crate::rng::{stream_seed, SplitMix64};
use crate::types::{ClassUniverse, Dataset, Example, ProbVector, UniverseError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("{weights} class weights for {k} classes")]
    WeightCount { k: usize, weights: usize },
    #[error("class weights must be non-negative and sum to 1, sum is {0}")]
    BadWeights(f64),
    #[error("sharpness must be positive and finite, got {0}")]
    BadSharpness(f64),
    #[error("noise must lie in [0, 1), got {0}")]
    BadNoise(f64),
    #[error("trial needs n_calib >= 1 and n_seeds >= 1")]
    BadTrialSize,
    #[error(transparent)]
    Universe(#[from] UniverseError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub k: usize,
    pub class_weights: Vec<f64>,
    pub sharpness: f64,
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Uniform class prior over `k` classes.
    pub fn uniform(k: usize, sharpness: f64, noise: f64, seed: u64) -> Self {
        Self {
            k,
            class_weights: vec![1.0 / k.max(1) as f64; k],
            sharpness,
            noise,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.k < 2 {
            return Err(SynthError::TooFewClasses(self.k));
        }
        if self.class_weights.len() != self.k {
            return Err(SynthError::WeightCount {
                k: self.k,
                weights: self.class_weights.len(),
            });
        }
        let sum: f64 = self.class_weights.iter().sum();
        if self
            .class_weights
            .iter()
            .any(|w| !w.is_finite() || *w < 0.0)
            || (sum - 1.0).abs() > 1e-9
        {
            return Err(SynthError::BadWeights(sum));
        }
        if !(self.sharpness.is_finite() && self.sharpness > 0.0) {
            return Err(SynthError::BadSharpness(self.sharpness));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(SynthError::BadNoise(self.noise));
        }
        Ok(())
    }
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self::uniform(9, 50.0, 0.02, 0)
    }
}

fn draw_label(rng: &mut SplitMix64, weights: &[f64]) -> usize {
    let u = rng.next_open01();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the accumulated mass: last class with weight
    weights
        .iter()
        .rposition(|&w| w > 0.0)
        .unwrap_or(weights.len() - 1)
}

fn draw_example(rng: &mut SplitMix64, spec: &SyntheticSpec, index: usize) -> Example {
    let k = spec.k;
    let label = draw_label(rng, &spec.class_weights);
    let focus = if rng.next_open01() < spec.noise {
        let offset = rng.below(k as u64 - 1) as usize;
        // skip over the true label
        if offset >= label {
            offset + 1
        } else {
            offset
        }
    } else {
        label
    };
    let mut raw: Vec<f64> = (0..k).map(|_| rng.next_exp()).collect();
    raw[focus] *= 1.0 + spec.sharpness;
    let sum: f64 = raw.iter().sum();
    let probs = raw.into_iter().map(|x| x / sum).collect();
    Example::labeled(format!("syn-{index:06}"), label, ProbVector::new(probs))
}

/// Draws `n` i.i.d. labeled examples. Same spec and `n` give the same dataset.
pub fn generate(spec: &SyntheticSpec, n: usize) -> Result<Dataset, SynthError> {
    spec.validate()?;
    let universe = ClassUniverse::generic(spec.k)?;
    let mut rng = SplitMix64::new(spec.seed);
    let examples = (0..n).map(|i| draw_example(&mut rng, spec, i)).collect();
    Ok(Dataset::new(universe, examples))
}

/// Empirical marginal coverage across independently seeded trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub alpha: f64,
    pub n_calib: usize,
    pub n_test: usize,
    pub n_seeds: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub per_seed: Vec<f64>,
}

/// The calibration and test specs used by trial `index`.
pub fn trial_specs(spec: &SyntheticSpec, index: usize) -> (SyntheticSpec, SyntheticSpec) {
    let base = stream_seed(spec.seed, index as u64);
    (
        spec.with_seed(stream_seed(base, 0)),
        spec.with_seed(stream_seed(base, 1)),
    )
}

/// Coverage of one calibrate-then-predict round on fresh data.
pub fn single_trial(
    spec: &SyntheticSpec,
    index: usize,
    n_calib: usize,
    n_test: usize,
    alpha: Alpha,
) -> Result<f64, SynthError> {
    let (calib_spec, test_spec) = trial_specs(spec, index);
    let calib = generate(&calib_spec, n_calib)?;
    let test = generate(&test_spec, n_test)?;
    let result = calibrate(&calib, alpha)?;
    let sets = predict_batch(&test, &result)?;
    let labels = test.labels().expect("synthetic data is labeled");
    if sets.is_empty() {
        // no test points: nothing was missed
        return Ok(1.0);
    }
    Ok(marginal_coverage(&sets, &labels)?)
}

/// Runs `n_seeds` independent trials in parallel and summarizes coverage.
pub fn coverage_trial(
    spec: &SyntheticSpec,
    n_calib: usize,
    n_test: usize,
    alpha: Alpha,
    n_seeds: usize,
) -> Result<TrialSummary, SynthError> {
    spec.validate()?;
    if n_calib == 0 || n_seeds == 0 {
        return Err(SynthError::BadTrialSize);
    }
    let per_seed = (0..n_seeds)
        .into_par_iter()
        .map(|i| single_trial(spec, i, n_calib, n_test, alpha))
        .collect::<Result<Vec<_>, _>>()?;
    let n = per_seed.len() as f64;
    let mean = per_seed.iter().sum::<f64>() / n;
    let sd = if per_seed.len() > 1 {
        (per_seed.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let min = per_seed.iter().copied().fold(f64::INFINITY, f64::min);
    let max = per_seed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(TrialSummary {
        alpha: alpha.value(),
        n_calib,
        n_test,
        n_seeds,
        mean,
        sd,
        min,
        max,
        per_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::argmax_class;
    use crate::types::validate_dataset;

    #[test]
    fn zero_samples() {
        let d = generate(&SyntheticSpec::default(), 0).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.k(), 9);
    }

    #[test]
    fn same_seed_same_data() {
        let spec = SyntheticSpec::uniform(9, 5.0, 0.1, 42);
        let a = generate(&spec, 500).unwrap();
        let b = generate(&spec, 500).unwrap();
        assert_eq!(a, b);
        for (x, y) in a.examples.iter().zip(&b.examples) {
            for (p, q) in x.probs.as_slice().iter().zip(y.probs.as_slice()) {
                assert_eq!(p.to_bits(), q.to_bits());
            }
        }
        let c = generate(&spec.with_seed(43), 500).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn very_sharp_noiseless_classifier_is_always_right() {
        let spec = SyntheticSpec::uniform(9, 1e12, 0.0, 7);
        let d = generate(&spec, 2000).unwrap();
        for ex in &d.examples {
            assert_eq!(argmax_class(&ex.probs), ex.true_label.unwrap());
        }
    }

    #[test]
    fn generated_data_validates() {
        let spec = SyntheticSpec {
            k: 4,
            class_weights: vec![0.1, 0.2, 0.3, 0.4],
            sharpness: 0.5,
            noise: 0.3,
            seed: 11,
        };
        let d = generate(&spec, 3000).unwrap();
        let report = validate_dataset(&d);
        assert!(report.violations.is_empty() && report.warnings.is_empty());
        let mut counts = [0usize; 4];
        for ex in &d.examples {
            counts[ex.true_label.unwrap()] += 1;
        }
        // prior respected to within a few standard errors
        for (c, w) in counts.iter().zip(&spec.class_weights) {
            let expected = w * 3000.0;
            assert!((*c as f64 - expected).abs() < 5.0 * (expected * (1.0 - w)).sqrt());
        }
    }

    #[test]
    fn noisy_classifier_focuses_wrong_class_at_the_noise_rate() {
        let spec = SyntheticSpec::uniform(5, 1e9, 0.25, 3);
        let d = generate(&spec, 4000).unwrap();
        let wrong = d
            .examples
            .iter()
            .filter(|e| argmax_class(&e.probs) != e.true_label.unwrap())
            .count() as f64
            / 4000.0;
        assert!((wrong - 0.25).abs() < 0.03, "wrong rate {wrong}");
    }

    #[test]
    fn invalid_specs() {
        let base = SyntheticSpec::default();
        assert_eq!(
            SyntheticSpec {
                k: 1,
                class_weights: vec![1.0],
                ..base.clone()
            }
            .validate(),
            Err(SynthError::TooFewClasses(1))
        );
        assert!(matches!(
            SyntheticSpec {
                sharpness: 0.0,
                ..base.clone()
            }
            .validate(),
            Err(SynthError::BadSharpness(_))
        ));
        assert!(matches!(
            SyntheticSpec {
                noise: 1.0,
                ..base.clone()
            }
            .validate(),
            Err(SynthError::BadNoise(_))
        ));
        assert!(matches!(
            SyntheticSpec {
                class_weights: vec![0.5; 9],
                ..base.clone()
            }
            .validate(),
            Err(SynthError::BadWeights(_))
        ));
        assert!(matches!(
            coverage_trial(&base, 0, 10, Alpha::default(), 1),
            Err(SynthError::BadTrialSize)
        ));
    }

    #[test]
    fn tiny_calibration_covers_everything() {
        let spec = SyntheticSpec::default();
        let t = coverage_trial(&spec, 5, 200, Alpha::new(0.05).unwrap(), 8).unwrap();
        assert!(t.per_seed.iter().all(|&c| c == 1.0));
        assert_eq!(t.sd, 0.0);
    }

    #[test]
    fn trial_is_deterministic() {
        let spec = SyntheticSpec::default().with_seed(99);
        let a = coverage_trial(&spec, 200, 500, Alpha::new(0.1).unwrap(), 6).unwrap();
        let b = coverage_trial(&spec, 200, 500, Alpha::new(0.1).unwrap(), 6).unwrap();
        assert_eq!(a, b);
    }
}
