//! Weighted selection of finetuning sets from a buffer.
//!
//! The pipeline has three stages, kept separate so each is testable on its
//! own:
//!
//! 1. optional **class adjustment** — every weight is multiplied by
//!    `total / count(class)` over the buffer's class frequencies, boosting
//!    rare classes so the finetuning set is not dominated by the head class;
//! 2. **normalization** to a probability vector;
//! 3. **sampling without replacement** using exponential race keys
//!    (`key = -ln(u) / p`): the items holding the `n_s` smallest keys win.
//!    An item with zero probability never wins; for a single draw the
//!    selection probability is exactly `p`.
//!
//! All randomness flows through a caller-provided RNG so identical seeds
//! reproduce identical selections.

use std::collections::HashMap;

use rand::distributions::Open01;
use rand::Rng;

use crate::error::{Error, Result};
use crate::weighting::WeightedCandidate;

/// How many items of each class a buffer holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassFrequencies {
    counts: HashMap<u32, usize>,
    total: usize,
}

impl ClassFrequencies {
    pub fn from_classes(classes: &[u32]) -> Self {
        let mut counts = HashMap::new();
        for &class in classes {
            *counts.entry(class).or_insert(0) += 1;
        }
        Self {
            counts,
            total: classes.len(),
        }
    }

    /// Builds from explicit per-class counts (zero counts are dropped).
    pub fn from_counts(counts: impl IntoIterator<Item = (u32, usize)>) -> Self {
        let counts: HashMap<u32, usize> = counts.into_iter().filter(|&(_, n)| n > 0).collect();
        let total = counts.values().sum();
        Self { counts, total }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn count(&self, class: u32) -> Option<usize> {
        self.counts.get(&class).copied()
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }
}

/// Parameters of one sampling call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleRequest {
    /// Number of items to select.
    pub n_s: usize,
    /// Whether to boost weights inversely to class frequency first.
    pub use_class_adjustment: bool,
    /// Seed for the selection RNG.
    pub rng_seed: u64,
}

/// Multiplies each weight by `total / count(class)`.
///
/// With buffer counts 90/10 two equal-weighted items become
/// `100/90` vs `10.0`: the minority item is nine times likelier.
pub fn adjust_for_class(
    weights: &[f64],
    classes: &[u32],
    freqs: &ClassFrequencies,
) -> Result<Vec<f64>> {
    if weights.len() != classes.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            got: classes.len(),
        });
    }
    let total = freqs.total() as f64;
    weights
        .iter()
        .zip(classes)
        .map(|(&w, &class)| {
            let count = freqs
                .count(class)
                .ok_or(Error::UnknownClassFrequency(class))?;
            Ok(w * total / count as f64)
        })
        .collect()
}

/// Scales weights to sum to one.
pub fn normalize(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::NonFiniteInput);
    }
    let sum: f64 = weights.iter().sum();
    if !sum.is_finite() || sum <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    Ok(weights.iter().map(|w| w / sum).collect())
}

/// Runs adjustment (when `classes` is given) and normalization, recording
/// the weight at every stage.
pub fn weighted_candidates(
    base_weights: &[f64],
    classes: Option<&[u32]>,
) -> Result<Vec<WeightedCandidate>> {
    let adjusted = match classes {
        Some(classes) => {
            let freqs = ClassFrequencies::from_classes(classes);
            adjust_for_class(base_weights, classes, &freqs)?
        }
        None => base_weights.to_vec(),
    };
    let probabilities = normalize(&adjusted)?;
    Ok(base_weights
        .iter()
        .zip(&adjusted)
        .zip(&probabilities)
        .enumerate()
        .map(|(item_index, ((&base, &adj), &p))| WeightedCandidate {
            item_index,
            base_weight: base,
            adjusted_weight: adj,
            probability: p,
        })
        .collect())
}

/// Samples `n_s` distinct indices with probability proportional to weight.
///
/// Each positive-probability item draws an exponential race key
/// `-ln(u) / p` with `u` open-uniform in `(0, 1)`; the `n_s` smallest keys
/// (ties broken by lower index) are selected. Zero-probability items never
/// participate. Returned indices are in ascending order.
pub fn weighted_sample_without_replacement(
    probabilities: &[f64],
    n_s: usize,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    if probabilities.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::NonFiniteInput);
    }
    let mut keyed: Vec<(f64, usize)> = Vec::with_capacity(probabilities.len());
    for (index, &p) in probabilities.iter().enumerate() {
        if p > 0.0 {
            let u: f64 = rng.sample(Open01);
            keyed.push((-u.ln() / p, index));
        }
    }
    if keyed.len() < n_s {
        return Err(Error::SampleSizeTooLarge {
            requested: n_s,
            available: keyed.len(),
        });
    }
    keyed.sort_by(|a, b| a.partial_cmp(b).expect("keys are finite"));
    let mut selected: Vec<usize> = keyed[..n_s].iter().map(|&(_, i)| i).collect();
    selected.sort_unstable();
    Ok(selected)
}

/// Samples `n_s` distinct indices uniformly, in ascending order.
pub fn uniform_sample_without_replacement(
    n_items: usize,
    n_s: usize,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    if n_items == 0 {
        return Err(Error::EmptyBuffer);
    }
    if n_s > n_items {
        return Err(Error::SampleSizeTooLarge {
            requested: n_s,
            available: n_items,
        });
    }
    let mut selected = rand::seq::index::sample(rng, n_items, n_s).into_vec();
    selected.sort_unstable();
    Ok(selected)
}
