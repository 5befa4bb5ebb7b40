//! Shared fixtures for the benchmarks.
//!
//! All benches run against the same synthetic drift corpus so numbers stay
//! comparable across groups and runs: 3 balanced classes, half of each
//! class's word inventory replaced a quarter of the way into the stream,
//! fixed seed.

use streamtune_core::{synth_drift_stream, StreamItem, SynthParams, Vocabulary};

/// Deterministic drift corpus plus the vocabulary that covers its pre-drift
/// words.
pub fn drift_corpus(n_items: usize) -> (Vec<StreamItem>, Vocabulary) {
    synth_drift_stream(&SynthParams {
        n_items,
        n_classes: 3,
        drift_point: n_items / 4,
        vocab_shift_fraction: 0.5,
        seed: 17,
    })
    .expect("fixture parameters are valid")
}
