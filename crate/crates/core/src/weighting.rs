//! Per-text base weights for the buffer sampling step.
//!
//! Three weighting schemes are supported, all producing strictly positive
//! weights so that no candidate is silently unreachable:
//!
//! * **length** — token count, min-max normalized over the buffer and
//!   shifted by [`EPSILON`];
//! * **tf-idf** — the summed tf-idf mass of a text against document
//!   frequencies computed over the same buffer, shifted by [`EPSILON`];
//! * **wordpiece ratio** — wordpieces per token, favouring texts the
//!   subword vocabulary decomposes poorly (a drift signal).
//!
//! Weights are relative sampling propensities, not probabilities; the
//! sampler normalizes them (optionally after class adjustment).

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::tokenizer::TokenizedText;

/// Additive floor keeping every weight strictly positive.
pub const EPSILON: f64 = 1e-6;

/// One buffer item with its sampling weight at each pipeline stage.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCandidate {
    /// Index of the item in the buffer it was weighted against.
    pub item_index: usize,
    /// Scheme weight before any class adjustment.
    pub base_weight: f64,
    /// Weight after class-frequency adjustment (equals `base_weight` when
    /// adjustment is off).
    pub adjusted_weight: f64,
    /// Normalized adjusted weight; sums to 1 over the buffer.
    pub probability: f64,
}

/// Min-max normalized token counts, shifted by [`EPSILON`].
///
/// When every text has the same length the weights are all exactly `1.0`
/// (uniform; no shift needed to stay positive).
pub fn length_weights(token_counts: &[usize]) -> Result<Vec<f64>> {
    if token_counts.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let min = *token_counts.iter().min().expect("non-empty") as f64;
    let max = *token_counts.iter().max().expect("non-empty") as f64;
    if min == max {
        return Ok(vec![1.0; token_counts.len()]);
    }
    let span = max - min;
    Ok(token_counts
        .iter()
        .map(|&c| (c as f64 - min) / span + EPSILON)
        .collect())
}

/// Document frequencies over one buffer of tokenized texts.
///
/// `df(t)` counts the documents containing `t` at least once, so repeated
/// occurrences within one document contribute a single count.
#[derive(Debug, Clone)]
pub struct DocumentFrequencyTable {
    df: HashMap<String, usize>,
    n_docs: usize,
}

impl DocumentFrequencyTable {
    pub fn from_docs<S: AsRef<str>>(docs: &[Vec<S>]) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let mut df: HashMap<String, usize> = HashMap::new();
        for doc in docs {
            let distinct: HashSet<&str> = doc.iter().map(AsRef::as_ref).collect();
            for token in distinct {
                *df.entry(token.to_owned()).or_insert(0) += 1;
            }
        }
        Ok(Self {
            df,
            n_docs: docs.len(),
        })
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn df(&self, token: &str) -> Option<usize> {
        self.df.get(token).copied()
    }

    /// `ln(n / df(t))`; `None` for tokens absent from the table.
    pub fn idf(&self, token: &str) -> Option<f64> {
        self.df(token)
            .map(|df| (self.n_docs as f64 / df as f64).ln())
    }
}

/// Summed tf-idf mass per document, shifted by [`EPSILON`].
///
/// The table must have been built over a corpus containing every token of
/// every document (normally the same buffer); a missing token is a caller
/// bug and yields [`Error::InconsistentDfTable`].
pub fn tfidf_weights<S: AsRef<str>>(
    docs: &[Vec<S>],
    table: &DocumentFrequencyTable,
) -> Result<Vec<f64>> {
    if docs.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let mut weights = Vec::with_capacity(docs.len());
    for doc in docs {
        let mut tf: HashMap<&str, usize> = HashMap::new();
        for token in doc {
            *tf.entry(token.as_ref()).or_insert(0) += 1;
        }
        let mut sum = 0.0;
        for (token, count) in tf {
            let idf = table
                .idf(token)
                .ok_or_else(|| Error::InconsistentDfTable(token.to_owned()))?;
            sum += count as f64 * idf;
        }
        weights.push(sum + EPSILON);
    }
    Ok(weights)
}

/// Wordpieces per token for each text; an empty text weighs [`EPSILON`].
pub fn wp_ratio_weights(tokenized: &[TokenizedText]) -> Result<Vec<f64>> {
    if tokenized.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    Ok(tokenized
        .iter()
        .map(|t| t.piece_token_ratio().unwrap_or(EPSILON))
        .collect())
}
