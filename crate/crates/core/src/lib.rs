//! Streaming text classification with selectively finetuned embeddings.
//!
//! This crate implements a prequential (test-then-train) harness for
//! studying how a hashing-based text embedder, finetuned once on a
//! weighted sample of buffered stream items, affects an online linear
//! classifier under concept drift. The pipeline is deterministic end to
//! end: every random choice flows from a caller-supplied seed through
//! labelled derivation, so a run is a pure function of `(dataset, config,
//! seed)`.
//!
//! The pieces, in stream order:
//!
//! - [`tokenizer`]: lowercasing word splitter plus greedy longest-match
//!   subword segmentation against a fixed vocabulary.
//! - [`weighting`]: per-text sampling weights (length, TF-IDF, subword
//!   ratio) over a buffer of tokenized texts.
//! - [`sampler`]: class-frequency adjustment and weighted sampling without
//!   replacement.
//! - [`embedder`]: signed feature hashing into a fixed-width count vector
//!   and a trainable linear projection with L2-normalized output.
//! - [`finetune`]: four contrastive/classification losses with exact
//!   gradients, a warmup-decay schedule, and a transactional training
//!   loop.
//! - [`classifier`]: an online one-vs-rest linear SVM consuming the
//!   embeddings.
//! - [`harness`]: stream loading and stratification, the synthetic drift
//!   generator, prequential metrics, scenario and experiment drivers, and
//!   CSV reporting.

pub mod classifier;
pub mod embedder;
pub mod error;
pub mod finetune;
pub mod harness;
pub mod hash;
pub mod sampler;
pub mod tokenizer;
pub mod weighting;

pub use classifier::{OnlineClassifier, SvmClassifier};
pub use embedder::{featurize, EmbedderState, EmbeddingVector, FileEmbedder, SparseCounts};
pub use error::{Error, Result};
pub use finetune::{finetune, LossKind, Schedule, TrainReport, TrainSample, TrainingPair};
pub use harness::{
    mean_std, run_experiment, run_scenario, run_scenario_with_classifier, synth_drift_stream,
    MetricsAccumulator, ResultRow, RunConfig, RunOutcome, RunResult, SamplingMethod, StreamItem,
    SynthParams,
};
pub use sampler::{ClassFrequencies, SampleRequest};
pub use tokenizer::{tokenize, TokenizedText, Vocabulary};
pub use weighting::{DocumentFrequencyTable, WeightedCandidate};
