//! Synthetic drift-stream generation.
//!
//! Produces a labelled text stream plus the matching wordpiece vocabulary
//! for desk-scale experiments. Each class owns a private word set; texts
//! mix class words with shared noise words. At the drift point a fraction
//! of every class's words is swapped for brand-new words that are absent
//! from the emitted vocabulary — they still decompose through the
//! single-character fallback pieces, but into many pieces, so the
//! wordpiece/token ratio of post-drift texts rises and ratio-weighted
//! sampling has something to find.
//!
//! Class priors decay geometrically (factor 0.6), giving the head class
//! roughly half the stream and mirroring the imbalance of real labelled
//! streams.

use std::collections::HashSet;

use rand::{Rng as _, SeedableRng as _};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::harness::stream::StreamItem;
use crate::tokenizer::{Vocabulary, DEFAULT_UNK_PIECE_COUNT};

/// Geometric decay factor of the class priors.
const PRIOR_DECAY: f64 = 0.6;
/// Words owned by each class.
const WORDS_PER_CLASS: usize = 40;
/// Shared noise words.
const NOISE_WORDS: usize = 60;
/// Probability that a text position draws a noise word.
const NOISE_PROB: f64 = 0.35;
/// Text length bounds in words.
const MIN_WORDS: usize = 5;
const MAX_WORDS: usize = 30;

/// Parameters of one synthetic stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub n_items: usize,
    pub n_classes: usize,
    /// Index of the first item drawn from the drifted distribution.
    pub drift_point: usize,
    /// Fraction of each class's words replaced at the drift point.
    pub vocab_shift_fraction: f64,
    pub seed: u64,
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        if self.n_items == 0 || self.n_classes == 0 {
            return Err(Error::InvalidConfig(
                "n_items and n_classes must be positive".into(),
            ));
        }
        if self.drift_point >= self.n_items {
            return Err(Error::InvalidConfig(format!(
                "drift_point {} must be < n_items {}",
                self.drift_point, self.n_items
            )));
        }
        if !(0.0..=1.0).contains(&self.vocab_shift_fraction) {
            return Err(Error::InvalidConfig(format!(
                "vocab_shift_fraction {} outside [0, 1]",
                self.vocab_shift_fraction
            )));
        }
        Ok(())
    }
}

fn random_word(rng: &mut ChaCha8Rng, taken: &mut HashSet<String>) -> String {
    loop {
        let len = rng.gen_range(4..=8);
        let word: String = (0..len)
            .map(|_| (b'a' + rng.gen_range(0..26u8)) as char)
            .collect();
        if taken.insert(word.clone()) {
            return word;
        }
    }
}

/// Generates the stream and its vocabulary.
///
/// The vocabulary holds every pre-drift class word and noise word as a
/// whole piece plus all single characters (standalone and continuation),
/// so pre-drift texts have ratio exactly 1 and drifted words decompose
/// into one piece per character.
pub fn synth_drift_stream(params: &SynthParams) -> Result<(Vec<StreamItem>, Vocabulary)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut taken = HashSet::new();

    let class_words: Vec<Vec<String>> = (0..params.n_classes)
        .map(|_| {
            (0..WORDS_PER_CLASS)
                .map(|_| random_word(&mut rng, &mut taken))
                .collect()
        })
        .collect();
    let noise_words: Vec<String> = (0..NOISE_WORDS)
        .map(|_| random_word(&mut rng, &mut taken))
        .collect();

    // Drifted word sets: the first ⌊shift · per-class⌋ words are replaced
    // by brand-new words kept out of the vocabulary.
    let n_shifted = (params.vocab_shift_fraction * WORDS_PER_CLASS as f64).round() as usize;
    let drifted_words: Vec<Vec<String>> = class_words
        .iter()
        .map(|words| {
            let mut drifted = words.clone();
            for slot in drifted.iter_mut().take(n_shifted) {
                *slot = random_word(&mut rng, &mut taken);
            }
            drifted
        })
        .collect();

    let mut entries: Vec<String> = Vec::new();
    entries.extend(class_words.iter().flatten().cloned());
    entries.extend(noise_words.iter().cloned());
    for c in ('a'..='z').chain('0'..='9') {
        entries.push(c.to_string());
        entries.push(format!("##{c}"));
    }
    let vocab = Vocabulary::new(entries, DEFAULT_UNK_PIECE_COUNT)?;

    // Geometric class priors as a cumulative table.
    let mass: Vec<f64> = (0..params.n_classes)
        .map(|c| PRIOR_DECAY.powi(c as i32))
        .collect();
    let total: f64 = mass.iter().sum();
    let mut cumulative = Vec::with_capacity(params.n_classes);
    let mut acc = 0.0;
    for m in &mass {
        acc += m / total;
        cumulative.push(acc);
    }

    let mut items = Vec::with_capacity(params.n_items);
    for index in 0..params.n_items {
        let u: f64 = rng.gen();
        let class = cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(params.n_classes - 1);
        let words = if index < params.drift_point {
            &class_words[class]
        } else {
            &drifted_words[class]
        };
        let n_words = rng.gen_range(MIN_WORDS..=MAX_WORDS);
        let mut text = String::new();
        for w in 0..n_words {
            if w > 0 {
                text.push(' ');
            }
            let word = if rng.gen_bool(NOISE_PROB) {
                &noise_words[rng.gen_range(0..noise_words.len())]
            } else {
                &words[rng.gen_range(0..words.len())]
            };
            text.push_str(word);
        }
        items.push(StreamItem {
            id: format!("synth-{index:06}"),
            text,
            class: class as u32,
            timestamp: index as i64,
        });
    }
    Ok((items, vocab))
}
