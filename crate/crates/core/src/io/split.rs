//! Seeded dataset partitioning.
//!
//! Examples are shuffled with Fisher–Yates driven by [`SplitMix64`] and then
//! cut into contiguous slices. Slice sizes use largest-remainder rounding so
//! they always sum to the input size. The stratified variant does the same
//! per true class and concatenates the per-class slices in class order.

use super::IoError;
use crate::rng::SplitMix64;
use crate::types::{Dataset, Example};

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub parts: Vec<(String, f64)>,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(parts: Vec<(String, f64)>, seed: u64, stratified: bool) -> Result<Self, IoError> {
        let spec = Self {
            parts,
            seed,
            stratified,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Even calibration / test split of a held-out set.
    pub fn calib_test(seed: u64) -> Self {
        Self {
            parts: vec![("calib".into(), 0.5), ("test".into(), 0.5)],
            seed,
            stratified: false,
        }
    }

    /// Parses `name=fraction,name=fraction,...`.
    pub fn parse_parts(text: &str) -> Result<Vec<(String, f64)>, IoError> {
        text.split(',')
            .map(|item| {
                let (name, frac) = item.split_once('=').ok_or_else(|| {
                    IoError::Split(format!("expected name=fraction, got {item:?}"))
                })?;
                let frac = frac
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| IoError::Split(format!("bad fraction in {item:?}")))?;
                Ok((name.trim().to_string(), frac))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), IoError> {
        if self.parts.is_empty() {
            return Err(IoError::Split("at least one part is required".into()));
        }
        for (name, frac) in &self.parts {
            if !(frac.is_finite() && *frac > 0.0 && *frac <= 1.0) {
                return Err(IoError::Split(format!(
                    "fraction for {name:?} must lie in (0, 1], got {frac}"
                )));
            }
        }
        let sum: f64 = self.parts.iter().map(|(_, f)| f).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(IoError::Split(format!("fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Largest-remainder apportionment of `n` items by `fractions`.
///
/// Remainders are compared at 1e-9 resolution so decimal fractions tie
/// exactly; ties go to the earlier part.
pub fn apportion(n: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut leftover = n.saturating_sub(assigned);
    let mut order: Vec<(i64, usize)> = quotas
        .iter()
        .zip(&sizes)
        .enumerate()
        .map(|(i, (q, &s))| (((q - s as f64) * 1e9).round() as i64, i))
        .collect();
    order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in order.iter().cycle() {
        if leftover == 0 {
            break;
        }
        sizes[i] += 1;
        leftover -= 1;
    }
    sizes
}

fn shuffle<T>(items: &mut [T], rng: &mut SplitMix64) {
    for i in (1..items.len()).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub parts: Vec<(String, Dataset)>,
    /// Parts that received no examples.
    pub warnings: Vec<String>,
}

impl SplitOutcome {
    pub fn part(&self, name: &str) -> Option<&Dataset> {
        self.parts.iter().find(|(n, _)| n == name).map(|(_, d)| d)
    }
}

/// Partitions `d` by `spec`. Deterministic in `spec.seed`.
pub fn split(d: &Dataset, spec: &SplitSpec) -> Result<SplitOutcome, IoError> {
    spec.validate()?;
    let fractions: Vec<f64> = spec.parts.iter().map(|(_, f)| *f).collect();
    let mut rng = SplitMix64::new(spec.seed);
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); spec.parts.len()];

    let strata: Vec<Vec<usize>> = if spec.stratified {
        // unlabeled examples form a final stratum of their own
        let mut groups = vec![Vec::new(); d.k() + 1];
        for (i, ex) in d.examples.iter().enumerate() {
            let g = ex.true_label.filter(|&l| l < d.k()).unwrap_or(d.k());
            groups[g].push(i);
        }
        groups
    } else {
        vec![(0..d.len()).collect()]
    };

    for mut stratum in strata {
        shuffle(&mut stratum, &mut rng);
        let sizes = apportion(stratum.len(), &fractions);
        let mut start = 0;
        for (bucket, size) in buckets.iter_mut().zip(sizes) {
            bucket.extend_from_slice(&stratum[start..start + size]);
            start += size;
        }
    }

    let mut warnings = Vec::new();
    let parts = spec
        .parts
        .iter()
        .zip(buckets)
        .map(|((name, _), idx)| {
            if idx.is_empty() {
                let msg = format!("split part {name:?} is empty");
                log::warn!("{msg}");
                warnings.push(msg);
            }
            let examples: Vec<Example> = idx.iter().map(|&i| d.examples[i].clone()).collect();
            (name.clone(), Dataset::new(d.universe.clone(), examples))
        })
        .collect();
    Ok(SplitOutcome { parts, warnings })
}
