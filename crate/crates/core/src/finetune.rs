//! Loss functions and the SGD driver that finetunes the embedder.
//!
//! Four objectives are supported, selected by [`LossKind`]:
//!
//! * **BATL** — batch-all triplet loss over normalized embeddings: every
//!   valid (anchor, positive, negative) triplet in a batch contributes
//!   `max(0, d(a,p) − d(a,n) + margin)`, averaged over *all* valid
//!   triplets (inactive ones dilute the mean rather than being dropped).
//! * **CTL** — binary logistic loss on the dot product of the *raw*
//!   (unnormalized) projected pair; positives are a text paired with
//!   itself, negatives a text paired with a uniformly drawn different one.
//! * **OCL** — contrastive loss with a continuous similarity label used as
//!   a weight: `label · d² + (1 − label) · max(0, margin − d)²`.
//! * **SL** — softmax classification of the pair feature
//!   `[u; v; |u − v|]` against the integer class distance, through a
//!   throwaway linear head trained jointly with the projection.
//!
//! All gradients are analytic, flowing through L2 normalization
//! (`∂L/∂v = (g − (g·e)e) / ‖v‖`) and accumulated into the projection via
//! sparse outer products. Each is validated against central finite
//! differences in the tests.
//!
//! [`finetune`] is transactional: it trains a clone and returns it with the
//! version bumped, so the caller's state is untouched by any error path.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom as _;
use rand::{Rng as _, SeedableRng as _};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};

use crate::embedder::{EmbedderState, SparseCounts, NORM_FLOOR};
use crate::error::{Error, Result};
use crate::hash::derive_seed;

/// Which training objective a finetune run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Batl,
    Ctl,
    Ocl,
    Sl,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::Batl, LossKind::Ctl, LossKind::Ocl, LossKind::Sl];

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Batl => "BATL",
            LossKind::Ctl => "CTL",
            LossKind::Ocl => "OCL",
            LossKind::Sl => "SL",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "BATL" => Ok(LossKind::Batl),
            "CTL" => Ok(LossKind::Ctl),
            "OCL" => Ok(LossKind::Ocl),
            "SL" => Ok(LossKind::Sl),
            other => Err(Error::InvalidConfig(format!(
                "unknown loss {other:?} (expected BATL, CTL, OCL or SL)"
            ))),
        }
    }
}

/// SGD hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub warmup_steps: usize,
    pub peak_lr: f64,
    pub margin: f64,
    pub ctl_negative_ratio: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            warmup_steps: 100,
            peak_lr: 1e-2,
            margin: 0.5,
            ctl_negative_ratio: 4,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.warmup_steps == 0 {
            return Err(Error::InvalidConfig(
                "epochs, batch_size and warmup_steps must be positive".into(),
            ));
        }
        if self.peak_lr.is_nan()
            || self.peak_lr <= 0.0
            || self.margin.is_nan()
            || self.margin <= 0.0
        {
            return Err(Error::InvalidConfig(
                "peak_lr and margin must be positive".into(),
            ));
        }
        if self.ctl_negative_ratio == 0 {
            return Err(Error::InvalidConfig(
                "ctl_negative_ratio must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Learning rate at 1-based step `step` of `total_steps`.
    ///
    /// Ramps linearly to `peak_lr` at `warmup_steps`, then decays linearly
    /// to exactly 0 at the final step. Runs no longer than the warmup ramp
    /// never decay.
    pub fn lr_at(&self, step: usize, total_steps: usize) -> f64 {
        debug_assert!(step >= 1 && step <= total_steps);
        if step <= self.warmup_steps || total_steps <= self.warmup_steps {
            self.peak_lr * step as f64 / self.warmup_steps as f64
        } else {
            self.peak_lr * (total_steps - step) as f64 / (total_steps - self.warmup_steps) as f64
        }
    }
}

/// One featurized training text with its class.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub counts: SparseCounts,
    pub class_id: u32,
}

/// Label attached to a training pair; the variant is fixed per loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairLabel {
    /// OCL: similarity in `[0, 1]`.
    Similarity(f64),
    /// SL: absolute class distance in `{0, …, n_classes − 1}`.
    ClassDistance(u32),
    /// CTL: positive (`true`) or negative pair.
    Binary(bool),
}

/// Two featurized texts plus a label.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub left: SparseCounts,
    pub right: SparseCounts,
    pub label: PairLabel,
}

fn check_pairable(samples: &[TrainSample], n_classes: usize) -> Result<()> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples(samples.len()));
    }
    if n_classes < 2 {
        return Err(Error::InvalidConfig(
            "pair labels need at least 2 classes".into(),
        ));
    }
    for sample in samples {
        if sample.class_id as usize >= n_classes {
            return Err(Error::LabelOutOfRange {
                label: sample.class_id,
                n_labels: n_classes,
            });
        }
    }
    Ok(())
}

fn matched_index_pairs(n: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    (0..n / 2)
        .map(|i| (order[2 * i], order[2 * i + 1]))
        .collect()
}

/// Pairs by seeded perfect matching; label `1 − |c₁ − c₂| / n_classes`.
///
/// Same class gives label 1; the label shrinks with ordinal class
/// distance and stays positive because the distance never reaches
/// `n_classes`.
pub fn build_ocl_pairs(
    samples: &[TrainSample],
    n_classes: usize,
    seed: u64,
) -> Result<Vec<TrainingPair>> {
    check_pairable(samples, n_classes)?;
    Ok(matched_index_pairs(samples.len(), seed)
        .into_iter()
        .map(|(i, j)| {
            let distance = samples[i].class_id.abs_diff(samples[j].class_id);
            TrainingPair {
                left: samples[i].counts.clone(),
                right: samples[j].counts.clone(),
                label: PairLabel::Similarity(1.0 - distance as f64 / n_classes as f64),
            }
        })
        .collect())
}

/// Pairs by seeded perfect matching; label `|c₁ − c₂|`.
pub fn build_sl_pairs(
    samples: &[TrainSample],
    n_classes: usize,
    seed: u64,
) -> Result<Vec<TrainingPair>> {
    check_pairable(samples, n_classes)?;
    Ok(matched_index_pairs(samples.len(), seed)
        .into_iter()
        .map(|(i, j)| TrainingPair {
            left: samples[i].counts.clone(),
            right: samples[j].counts.clone(),
            label: PairLabel::ClassDistance(samples[i].class_id.abs_diff(samples[j].class_id)),
        })
        .collect())
}

/// Self-supervised pairs: each text once with itself (positive) and
/// `ratio` times with a uniformly drawn *different* text (negative).
pub fn build_ctl_pairs(
    samples: &[TrainSample],
    ratio: usize,
    seed: u64,
) -> Result<Vec<TrainingPair>> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples(samples.len()));
    }
    if ratio == 0 {
        return Err(Error::InvalidConfig(
            "ctl_negative_ratio must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(samples.len() * (1 + ratio));
    for (i, sample) in samples.iter().enumerate() {
        pairs.push(TrainingPair {
            left: sample.counts.clone(),
            right: sample.counts.clone(),
            label: PairLabel::Binary(true),
        });
        for _ in 0..ratio {
            let mut j = rng.gen_range(0..samples.len() - 1);
            if j >= i {
                j += 1;
            }
            pairs.push(TrainingPair {
                left: sample.counts.clone(),
                right: samples[j].counts.clone(),
                label: PairLabel::Binary(false),
            });
        }
    }
    Ok(pairs)
}

/// Normalized projection plus the raw norm needed for backprop.
struct Projected {
    unit: Vec<f64>,
    norm: f64,
}

fn project(state: &EmbedderState, counts: &SparseCounts) -> Result<Projected> {
    let raw = state.project(counts)?;
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    let unit = if norm < NORM_FLOOR {
        vec![0.0; raw.len()]
    } else {
        raw.iter().map(|x| x / norm).collect()
    };
    Ok(Projected { unit, norm })
}

/// Folds `∂L/∂e` (`grad_unit`) back through normalization and the sparse
/// input into the projection gradient.
fn backprop_normalized(
    grad_unit: &[f64],
    projected: &Projected,
    counts: &SparseCounts,
    grad_projection: &mut [f64],
    hash_dim: usize,
) {
    if projected.norm < NORM_FLOOR {
        return; // embedding was clamped to zero; treat as constant
    }
    let dot: f64 = grad_unit
        .iter()
        .zip(&projected.unit)
        .map(|(g, e)| g * e)
        .sum();
    for (row, (&g, &e)) in grad_unit.iter().zip(&projected.unit).enumerate() {
        let dv = (g - dot * e) / projected.norm;
        if dv == 0.0 {
            continue;
        }
        let row_grad = &mut grad_projection[row * hash_dim..(row + 1) * hash_dim];
        for &(bucket, count) in &counts.entries {
            row_grad[bucket] += dv * count;
        }
    }
}

/// Folds `∂L/∂v` (gradient on the raw projection) into the projection
/// gradient.
fn backprop_raw(
    grad_raw: &[f64],
    counts: &SparseCounts,
    grad_projection: &mut [f64],
    hash_dim: usize,
) {
    for (row, &dv) in grad_raw.iter().enumerate() {
        if dv == 0.0 {
            continue;
        }
        let row_grad = &mut grad_projection[row * hash_dim..(row + 1) * hash_dim];
        for &(bucket, count) in &counts.entries {
            row_grad[bucket] += dv * count;
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Batch-all triplet loss and projection gradient.
///
/// A valid triplet is an ordered `(a, p, n)` with `a ≠ p`,
/// `class(a) == class(p)` and `class(n) ≠ class(a)`. The mean runs over all
/// valid triplets; a batch with none (single class, or no same-class pair)
/// has zero loss and gradient by definition.
pub fn batl_loss_and_grad(
    batch: &[TrainSample],
    state: &EmbedderState,
    margin: f64,
) -> Result<(f64, Vec<f64>)> {
    let hash_dim = state.hash_dim();
    let mut grad = vec![0.0; state.projection().len()];
    let projected: Vec<Projected> = batch
        .iter()
        .map(|s| project(state, &s.counts))
        .collect::<Result<_>>()?;

    // The mean denominator includes inactive hinges: a class with m members
    // among n items yields m(m−1) ordered anchor/positive pairs, each
    // combined with the n − m out-of-class negatives.
    let mut class_sizes: std::collections::HashMap<u32, usize> = std::collections::HashMap::new();
    for s in batch {
        *class_sizes.entry(s.class_id).or_insert(0) += 1;
    }
    let n_valid: usize = class_sizes
        .values()
        .map(|&m| m * (m - 1) * (batch.len() - m))
        .sum();
    if n_valid == 0 {
        return Ok((0.0, grad));
    }

    let dim = state.out_dim();
    let mut grad_unit = vec![0.0; batch.len() * dim];
    let mut loss = 0.0;
    for a in 0..batch.len() {
        for p in 0..batch.len() {
            if a == p || batch[a].class_id != batch[p].class_id {
                continue;
            }
            let d_ap = euclidean(&projected[a].unit, &projected[p].unit);
            for n in 0..batch.len() {
                if batch[n].class_id == batch[a].class_id {
                    continue;
                }
                let d_an = euclidean(&projected[a].unit, &projected[n].unit);
                let hinge = d_ap - d_an + margin;
                if hinge <= 0.0 {
                    continue;
                }
                loss += hinge;
                // d(d_ap)/d e_a = (e_a − e_p)/d_ap, zero subgradient at
                // coincident points.
                if d_ap > NORM_FLOOR {
                    for k in 0..dim {
                        let diff = (projected[a].unit[k] - projected[p].unit[k]) / d_ap;
                        grad_unit[a * dim + k] += diff;
                        grad_unit[p * dim + k] -= diff;
                    }
                }
                if d_an > NORM_FLOOR {
                    for k in 0..dim {
                        let diff = (projected[a].unit[k] - projected[n].unit[k]) / d_an;
                        grad_unit[a * dim + k] -= diff;
                        grad_unit[n * dim + k] += diff;
                    }
                }
            }
        }
    }
    let scale = 1.0 / n_valid as f64;
    loss *= scale;
    for i in 0..batch.len() {
        let slice = &mut grad_unit[i * dim..(i + 1) * dim];
        for g in slice.iter_mut() {
            *g *= scale;
        }
        backprop_normalized(
            &grad_unit[i * dim..(i + 1) * dim],
            &projected[i],
            &batch[i].counts,
            &mut grad,
            hash_dim,
        );
    }
    Ok((loss, grad))
}

/// Numerically stable `ln(1 + e^z)`.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary logistic loss on the raw projected dot product.
///
/// Per pair: `−ln σ(u·v)` for positives, `−ln σ(−u·v)` for negatives,
/// computed through softplus for stability. No normalization is applied, so
/// the magnitude of the projections carries signal.
pub fn ctl_loss_and_grad(pairs: &[TrainingPair], state: &EmbedderState) -> Result<(f64, Vec<f64>)> {
    if pairs.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let hash_dim = state.hash_dim();
    let mut grad = vec![0.0; state.projection().len()];
    let mut loss = 0.0;
    let scale = 1.0 / pairs.len() as f64;
    for pair in pairs {
        let positive = match pair.label {
            PairLabel::Binary(b) => b,
            _ => {
                return Err(Error::InvalidConfig(
                    "CTL requires binary pair labels".into(),
                ))
            }
        };
        let u = state.project(&pair.left)?;
        let v = state.project(&pair.right)?;
        let s: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();
        loss += scale * if positive { softplus(-s) } else { softplus(s) };
        // dL/ds = σ(s) − y.
        let ds = scale * (sigmoid(s) - f64::from(positive));
        let grad_u: Vec<f64> = v.iter().map(|x| ds * x).collect();
        let grad_v: Vec<f64> = u.iter().map(|x| ds * x).collect();
        backprop_raw(&grad_u, &pair.left, &mut grad, hash_dim);
        backprop_raw(&grad_v, &pair.right, &mut grad, hash_dim);
    }
    Ok((loss, grad))
}

/// Contrastive loss with a continuous similarity weight.
///
/// Per pair: `label · d² + (1 − label) · max(0, margin − d)²` over
/// normalized embeddings.
pub fn ocl_loss_and_grad(
    pairs: &[TrainingPair],
    state: &EmbedderState,
    margin: f64,
) -> Result<(f64, Vec<f64>)> {
    if pairs.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let hash_dim = state.hash_dim();
    let dim = state.out_dim();
    let mut grad = vec![0.0; state.projection().len()];
    let mut loss = 0.0;
    let scale = 1.0 / pairs.len() as f64;
    for pair in pairs {
        let label = match pair.label {
            PairLabel::Similarity(l) => l,
            _ => {
                return Err(Error::InvalidConfig(
                    "OCL requires similarity pair labels".into(),
                ))
            }
        };
        let left = project(state, &pair.left)?;
        let right = project(state, &pair.right)?;
        let d = euclidean(&left.unit, &right.unit);
        let pull = (margin - d).max(0.0);
        loss += scale * (label * d * d + (1.0 - label) * pull * pull);

        // label · d²  differentiates cleanly to 2·label·(e_l − e_r);
        // the hinge term needs the direction (e_l − e_r)/d, undefined at
        // d = 0 where its subgradient is zero anyway.
        let mut grad_left = vec![0.0; dim];
        let mut grad_right = vec![0.0; dim];
        for k in 0..dim {
            let diff = left.unit[k] - right.unit[k];
            let mut g = 2.0 * label * diff;
            if pull > 0.0 && d > NORM_FLOOR {
                g -= 2.0 * (1.0 - label) * pull * diff / d;
            }
            grad_left[k] = scale * g;
            grad_right[k] = -scale * g;
        }
        backprop_normalized(&grad_left, &left, &pair.left, &mut grad, hash_dim);
        backprop_normalized(&grad_right, &right, &pair.right, &mut grad, hash_dim);
    }
    Ok((loss, grad))
}

/// Softmax classification of `[u; v; |u − v|]` against the class distance.
///
/// Returns the loss and the gradients for the projection and for the
/// `n_labels × 3·out_dim` head (row-major), both batch means.
pub fn sl_loss_and_grad(
    pairs: &[TrainingPair],
    state: &EmbedderState,
    head: &[f64],
    n_labels: usize,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if pairs.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let dim = state.out_dim();
    let phi_dim = 3 * dim;
    if n_labels == 0 || head.len() != n_labels * phi_dim {
        return Err(Error::DimensionMismatch {
            expected: n_labels * phi_dim,
            got: head.len(),
        });
    }
    let hash_dim = state.hash_dim();
    let mut grad = vec![0.0; state.projection().len()];
    let mut grad_head = vec![0.0; head.len()];
    let mut loss = 0.0;
    let scale = 1.0 / pairs.len() as f64;
    for pair in pairs {
        let label = match pair.label {
            PairLabel::ClassDistance(c) => c,
            _ => {
                return Err(Error::InvalidConfig(
                    "SL requires class-distance pair labels".into(),
                ))
            }
        };
        if label as usize >= n_labels {
            return Err(Error::LabelOutOfRange { label, n_labels });
        }
        let left = project(state, &pair.left)?;
        let right = project(state, &pair.right)?;
        let mut phi = Vec::with_capacity(phi_dim);
        phi.extend_from_slice(&left.unit);
        phi.extend_from_slice(&right.unit);
        for k in 0..dim {
            phi.push((left.unit[k] - right.unit[k]).abs());
        }

        let logits: Vec<f64> = (0..n_labels)
            .map(|row| {
                head[row * phi_dim..(row + 1) * phi_dim]
                    .iter()
                    .zip(&phi)
                    .map(|(w, x)| w * x)
                    .sum()
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        loss += scale * (lse - logits[label as usize]);

        // δ = softmax − onehot; head gradient is δ φᵀ, feature gradient
        // headᵀ δ.
        let mut grad_phi = vec![0.0; phi_dim];
        for row in 0..n_labels {
            let delta = scale * ((logits[row] - lse).exp() - f64::from(row as u32 == label));
            let head_row = &head[row * phi_dim..(row + 1) * phi_dim];
            let grad_row = &mut grad_head[row * phi_dim..(row + 1) * phi_dim];
            for k in 0..phi_dim {
                grad_row[k] += delta * phi[k];
                grad_phi[k] += delta * head_row[k];
            }
        }

        // Split φ back into its three blocks; |u − v| routes via sign.
        let mut grad_left = vec![0.0; dim];
        let mut grad_right = vec![0.0; dim];
        for k in 0..dim {
            let sign = (left.unit[k] - right.unit[k]).signum();
            let sign = if left.unit[k] == right.unit[k] {
                0.0
            } else {
                sign
            };
            grad_left[k] = grad_phi[k] + sign * grad_phi[2 * dim + k];
            grad_right[k] = grad_phi[dim + k] - sign * grad_phi[2 * dim + k];
        }
        backprop_normalized(&grad_left, &left, &pair.left, &mut grad, hash_dim);
        backprop_normalized(&grad_right, &right, &pair.right, &mut grad, hash_dim);
    }
    Ok((loss, grad, grad_head))
}

/// Outcome of one finetune run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean batch loss over the first epoch.
    pub initial_loss: f64,
    /// Mean batch loss over the final epoch.
    pub final_loss: f64,
    /// SGD steps executed (`epochs × ⌈units / batch_size⌉`).
    pub steps: usize,
    pub wall_time_seconds: f64,
}

enum TrainingData {
    Samples(Vec<TrainSample>),
    Pairs(Vec<TrainingPair>),
}

impl TrainingData {
    fn len(&self) -> usize {
        match self {
            TrainingData::Samples(s) => s.len(),
            TrainingData::Pairs(p) => p.len(),
        }
    }

    fn shuffle(&mut self, rng: &mut ChaCha8Rng) {
        match self {
            TrainingData::Samples(s) => s.shuffle(rng),
            TrainingData::Pairs(p) => p.shuffle(rng),
        }
    }
}

/// Finetunes a clone of `state` on the sampled texts and returns it with
/// `version` bumped; the input state is never mutated.
///
/// Training data is built once up front by the loss-specific builder
/// (BATL trains on the samples directly), then visited in per-epoch
/// reshuffled batches under the warmup/decay schedule. A non-finite batch
/// loss aborts with [`Error::Divergence`].
pub fn finetune(
    state: &EmbedderState,
    samples: &[TrainSample],
    loss_kind: LossKind,
    schedule: &Schedule,
    n_classes: usize,
    seed: u64,
) -> Result<(EmbedderState, TrainReport)> {
    let start = Instant::now();
    schedule.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyBuffer);
    }

    let pair_seed = derive_seed(seed, "pairs", 0);
    let mut data = match loss_kind {
        LossKind::Batl => TrainingData::Samples(samples.to_vec()),
        LossKind::Ctl => TrainingData::Pairs(build_ctl_pairs(
            samples,
            schedule.ctl_negative_ratio,
            pair_seed,
        )?),
        LossKind::Ocl => TrainingData::Pairs(build_ocl_pairs(samples, n_classes, pair_seed)?),
        LossKind::Sl => TrainingData::Pairs(build_sl_pairs(samples, n_classes, pair_seed)?),
    };

    let phi_dim = 3 * state.out_dim();
    let mut head = if loss_kind == LossKind::Sl {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "head", 0));
        let normal = Normal::new(0.0, 1.0 / (phi_dim as f64).sqrt()).expect("positive sd");
        (0..n_classes * phi_dim)
            .map(|_| normal.sample(&mut rng))
            .collect()
    } else {
        Vec::new()
    };

    let batches_per_epoch = data.len().div_ceil(schedule.batch_size);
    let total_steps = schedule.epochs * batches_per_epoch;
    let mut epoch_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "epochs", 0));

    let mut new_state = state.clone();
    let mut step = 0usize;
    let mut initial_loss = 0.0;
    let mut final_loss = 0.0;
    for epoch in 0..schedule.epochs {
        data.shuffle(&mut epoch_rng);
        let mut epoch_loss = 0.0;
        for batch_index in 0..batches_per_epoch {
            step += 1;
            let lo = batch_index * schedule.batch_size;
            let hi = (lo + schedule.batch_size).min(data.len());
            let (loss, grad, head_grad) = match (&data, loss_kind) {
                (TrainingData::Samples(s), LossKind::Batl) => {
                    let (l, g) = batl_loss_and_grad(&s[lo..hi], &new_state, schedule.margin)?;
                    (l, g, None)
                }
                (TrainingData::Pairs(p), LossKind::Ctl) => {
                    let (l, g) = ctl_loss_and_grad(&p[lo..hi], &new_state)?;
                    (l, g, None)
                }
                (TrainingData::Pairs(p), LossKind::Ocl) => {
                    let (l, g) = ocl_loss_and_grad(&p[lo..hi], &new_state, schedule.margin)?;
                    (l, g, None)
                }
                (TrainingData::Pairs(p), LossKind::Sl) => {
                    let (l, g, hg) = sl_loss_and_grad(&p[lo..hi], &new_state, &head, n_classes)?;
                    (l, g, Some(hg))
                }
                _ => unreachable!("data variant fixed by loss kind"),
            };
            if !loss.is_finite() {
                return Err(Error::Divergence { step });
            }
            epoch_loss += loss;
            let lr = schedule.lr_at(step, total_steps);
            for (p, g) in new_state.projection_mut().iter_mut().zip(&grad) {
                *p -= lr * g;
            }
            if let Some(hg) = head_grad {
                for (w, g) in head.iter_mut().zip(&hg) {
                    *w -= lr * g;
                }
            }
        }
        let epoch_mean = epoch_loss / batches_per_epoch as f64;
        if epoch == 0 {
            initial_loss = epoch_mean;
        }
        final_loss = epoch_mean;
    }
    new_state.bump_version();
    Ok((
        new_state,
        TrainReport {
            initial_loss,
            final_loss,
            steps: step,
            wall_time_seconds: start.elapsed().as_secs_f64(),
        },
    ))
}
