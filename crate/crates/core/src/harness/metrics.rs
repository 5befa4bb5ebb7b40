//! Cumulative prequential metrics.
//!
//! The accumulator ingests one `(gold, prediction)` outcome per stream item
//! and can produce the cumulative macro-F1 at any point. A `None`
//! prediction (the classifier had seen no class yet) counts as a false
//! negative for the gold class and a false positive for nothing.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct ClassCounts {
    tp: usize,
    fp: usize,
    fn_: usize,
    gold: usize,
}

/// Running per-class confusion counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetricsAccumulator {
    counts: BTreeMap<u32, ClassCounts>,
    item_count: usize,
}

impl MetricsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, gold: u32, prediction: Option<u32>) {
        self.item_count += 1;
        let gold_counts = self.counts.entry(gold).or_default();
        gold_counts.gold += 1;
        match prediction {
            Some(p) if p == gold => gold_counts.tp += 1,
            other => {
                gold_counts.fn_ += 1;
                if let Some(p) = other {
                    self.counts.entry(p).or_default().fp += 1;
                }
            }
        }
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    /// Unweighted mean F1 over the classes observed in the gold labels.
    ///
    /// Per class, precision and recall with `0/0` read as 0, harmonically
    /// combined with the same convention. Classes that only ever appeared
    /// as predictions contribute nothing.
    pub fn macro_f1(&self) -> Result<f64> {
        if self.item_count == 0 {
            return Err(Error::EmptyBuffer);
        }
        let mut sum = 0.0;
        let mut n = 0usize;
        for c in self.counts.values() {
            if c.gold == 0 {
                continue;
            }
            n += 1;
            let precision = ratio_or_zero(c.tp, c.tp + c.fp);
            let recall = ratio_or_zero(c.tp, c.tp + c.fn_);
            sum += if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
        }
        debug_assert!(n > 0, "items imply at least one gold class");
        Ok(sum / n as f64)
    }
}

fn ratio_or_zero(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}
