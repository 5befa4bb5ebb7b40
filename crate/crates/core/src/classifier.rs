//! Incremental one-vs-rest linear SVM over embedding vectors.
//!
//! This is the downstream model of the prequential loop: it predicts each
//! arriving item from its embedding, then learns from the revealed label.
//! Each class owns one binary hinge-loss machine updated with the
//! Pegasos-style step size `η = 1/(λ·t)`; classes are discovered online, so
//! a label never seen before simply registers a fresh zero-initialized
//! machine. There is no internal randomness: identical update sequences
//! yield bit-identical parameters.

use crate::error::{Error, Result};

/// Default L2 regularization strength.
pub const DEFAULT_LAMBDA: f64 = 1e-4;

/// Anything that can play the prequential predict-then-learn role.
pub trait OnlineClassifier {
    /// Predicted class for an embedding.
    fn predict(&self, x: &[f64]) -> Result<u32>;

    /// Consumes one labelled example.
    fn learn(&mut self, x: &[f64], y: u32) -> Result<()>;

    /// Number of classes registered so far.
    fn n_classes(&self) -> usize;
}

/// One-vs-rest linear SVM with online class discovery.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmClassifier {
    dim: usize,
    lambda: f64,
    step_count: u64,
    /// Class ids in first-seen order; `weights` and `biases` are parallel.
    classes: Vec<u32>,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

impl SvmClassifier {
    pub fn new(dim: usize, lambda: f64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        assert!(lambda > 0.0, "lambda must be positive");
        Self {
            dim,
            lambda,
            step_count: 0,
            classes: Vec::new(),
            weights: Vec::new(),
            biases: Vec::new(),
        }
    }

    /// Rebuilds a classifier from explicit parameters (shape-checked).
    pub fn from_parts(
        dim: usize,
        lambda: f64,
        classes: Vec<u32>,
        weights: Vec<Vec<f64>>,
        biases: Vec<f64>,
        step_count: u64,
    ) -> Result<Self> {
        if classes.len() != weights.len() || classes.len() != biases.len() {
            return Err(Error::DimensionMismatch {
                expected: classes.len(),
                got: weights.len().max(biases.len()),
            });
        }
        for w in &weights {
            if w.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: w.len(),
                });
            }
        }
        let mut sorted = classes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != classes.len() {
            return Err(Error::InvalidConfig("duplicate class id".into()));
        }
        Ok(Self {
            dim,
            lambda,
            step_count,
            classes,
            weights,
            biases,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Class ids in first-seen order.
    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    /// Per-class decision values `wᶜ·x + bᶜ`, in first-seen order.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<(u32, f64)>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self
            .classes
            .iter()
            .zip(&self.weights)
            .zip(&self.biases)
            .map(|((&class, w), &b)| {
                let score: f64 = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum();
                (class, score + b)
            })
            .collect())
    }

    fn register(&mut self, class: u32) {
        if !self.classes.contains(&class) {
            self.classes.push(class);
            self.weights.push(vec![0.0; self.dim]);
            self.biases.push(0.0);
        }
    }
}

impl OnlineClassifier for SvmClassifier {
    /// Argmax of the decision values; exact ties go to the lowest class id
    /// (not the first-seen one).
    fn predict(&self, x: &[f64]) -> Result<u32> {
        if self.classes.is_empty() {
            return Err(Error::NoClassesSeen);
        }
        let scores = self.scores(x)?;
        let mut best = scores[0];
        for &(class, score) in &scores[1..] {
            if score > best.1 || (score == best.1 && class < best.0) {
                best = (class, score);
            }
        }
        Ok(best.0)
    }

    fn learn(&mut self, x: &[f64], y: u32) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        self.register(y);
        self.step_count += 1;
        let eta = 1.0 / (self.lambda * self.step_count as f64);
        let decay = 1.0 - eta * self.lambda;
        for ((class, w), b) in self
            .classes
            .iter()
            .zip(&mut self.weights)
            .zip(&mut self.biases)
        {
            let target = if *class == y { 1.0 } else { -1.0 };
            let score: f64 = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + *b;
            if target * score < 1.0 {
                for (wi, xi) in w.iter_mut().zip(x) {
                    *wi = decay * *wi + eta * target * xi;
                }
                *b += eta * target;
            } else {
                for wi in w.iter_mut() {
                    *wi *= decay;
                }
            }
        }
        Ok(())
    }

    fn n_classes(&self) -> usize {
        self.classes.len()
    }
}
