//! The prequential scenario: stream replay, test-then-train, one finetune
//! trigger, repetition and aggregation.
//!
//! A run replays a stratified stream one item at a time. Every item is
//! embedded, classified, scored against its gold label, and only then shown
//! to the classifier — so no prediction ever depends on its own label. The
//! first `buffer_size` items are also buffered (tokenized eagerly, so the
//! tokenization cost sits inside the timed loop for every method equally).
//! When the item at index `buffer_size` arrives, a non-baseline run weighs
//! the buffer, samples `sample_size` texts, finetunes the embedder, and
//! resumes with the updated projection; the classifier is deliberately not
//! reset, which is what lets a bad finetune visibly hurt the cumulative
//! score. Elapsed time covers the whole loop including the finetune.

use rayon::prelude::*;

use crate::classifier::{OnlineClassifier, SvmClassifier};
use crate::embedder::{featurize, EmbedderState, SparseCounts};
use crate::error::{Error, Result};
use crate::finetune::{finetune, LossKind, Schedule, TrainReport, TrainSample};
use crate::harness::metrics::MetricsAccumulator;
use crate::harness::stream::{stratified_stream, StreamItem};
use crate::hash::derive_seed;
use crate::sampler::{
    uniform_sample_without_replacement, weighted_candidates, weighted_sample_without_replacement,
};
use crate::tokenizer::{tokenize, TokenizedText, Vocabulary};
use crate::weighting::{length_weights, tfidf_weights, wp_ratio_weights, DocumentFrequencyTable};
use rand::SeedableRng as _;
use rand_chacha::ChaCha8Rng;

/// How the finetuning set is drawn from the buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplingMethod {
    Random,
    Length,
    LengthClass,
    Tfidf,
    TfidfClass,
    WpRatio,
    WpRatioClass,
    /// Baseline: never trigger a finetune.
    None,
}

impl SamplingMethod {
    pub const ALL: [SamplingMethod; 8] = [
        SamplingMethod::Random,
        SamplingMethod::Length,
        SamplingMethod::LengthClass,
        SamplingMethod::Tfidf,
        SamplingMethod::TfidfClass,
        SamplingMethod::WpRatio,
        SamplingMethod::WpRatioClass,
        SamplingMethod::None,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SamplingMethod::Random => "random",
            SamplingMethod::Length => "length",
            SamplingMethod::LengthClass => "length_class",
            SamplingMethod::Tfidf => "tfidf",
            SamplingMethod::TfidfClass => "tfidf_class",
            SamplingMethod::WpRatio => "wpratio",
            SamplingMethod::WpRatioClass => "wpratio_class",
            SamplingMethod::None => "none",
        }
    }

    pub fn is_baseline(self) -> bool {
        self == SamplingMethod::None
    }

    pub fn uses_class_adjustment(self) -> bool {
        matches!(
            self,
            SamplingMethod::LengthClass | SamplingMethod::TfidfClass | SamplingMethod::WpRatioClass
        )
    }
}

impl std::fmt::Display for SamplingMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SamplingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SamplingMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown sampling method {s:?} (expected one of random, length, \
                     length_class, tfidf, tfidf_class, wpratio, wpratio_class, none)"
                ))
            })
    }
}

/// Fully resolved parameters of one run (before repetition).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub stream_length: usize,
    /// Buffered item count; also the trigger index.
    pub buffer_size: usize,
    /// Finetuning set size; ignored for the baseline.
    pub sample_size: usize,
    pub method: SamplingMethod,
    /// Ignored for the baseline.
    pub loss: LossKind,
    pub repetitions: usize,
    pub master_seed: u64,
    pub hash_dim: usize,
    pub out_dim: usize,
    pub unk_piece_count: usize,
    pub lambda: f64,
    pub schedule: Schedule,
    /// Trajectory checkpoint spacing in items.
    pub trajectory_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            stream_length: 200_000,
            buffer_size: 50_000,
            sample_size: 500,
            method: SamplingMethod::None,
            loss: LossKind::Batl,
            repetitions: 5,
            master_seed: 42,
            hash_dim: 512,
            out_dim: 64,
            unk_piece_count: 2,
            lambda: 1e-4,
            schedule: Schedule::default(),
            trajectory_every: 1_000,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stream_length == 0 {
            return Err(Error::InvalidConfig(
                "stream_length must be positive".into(),
            ));
        }
        if self.buffer_size == 0 || self.buffer_size > self.stream_length {
            return Err(Error::InvalidConfig(format!(
                "buffer_size {} must be in 1..=stream_length {} (keys buffer_size, stream_length)",
                self.buffer_size, self.stream_length
            )));
        }
        if !self.method.is_baseline()
            && (self.sample_size == 0 || self.sample_size > self.buffer_size)
        {
            return Err(Error::InvalidConfig(format!(
                "sample_size {} must be in 1..=buffer_size {} (keys sample_size, buffer_size)",
                self.sample_size, self.buffer_size
            )));
        }
        if self.hash_dim == 0 || self.out_dim == 0 {
            return Err(Error::InvalidConfig(
                "hash_dim and out_dim must be positive".into(),
            ));
        }
        if self.unk_piece_count == 0 {
            return Err(Error::InvalidConfig(
                "unk_piece_count must be positive".into(),
            ));
        }
        if self.lambda.is_nan() || self.lambda <= 0.0 {
            return Err(Error::InvalidConfig("lambda must be positive".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidConfig("repetitions must be positive".into()));
        }
        if self.trajectory_every == 0 {
            return Err(Error::InvalidConfig(
                "trajectory_every must be positive".into(),
            ));
        }
        self.schedule.validate()
    }

    /// Stable identifier of one repetition, used for file names and rows.
    pub fn run_id(&self, repetition: usize) -> String {
        if self.method.is_baseline() {
            format!("none_rep{repetition}")
        } else {
            format!(
                "{}_{}_{}_rep{repetition}",
                self.method, self.loss, self.sample_size
            )
        }
    }

    /// Seed of one repetition, derived from the master seed.
    pub fn repetition_seed(&self, repetition: usize) -> u64 {
        derive_seed(self.master_seed, "repetition", repetition as u64)
    }
}

/// Everything one run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub final_macro_f1: f64,
    /// `(items seen, cumulative macro-F1)` checkpoints, ending at the
    /// stream end.
    pub trajectory: Vec<(usize, f64)>,
    pub elapsed_seconds: f64,
    /// Present iff a finetune ran.
    pub train_report: Option<TrainReport>,
    pub final_embedder_version: u64,
    /// Per item: gold class and prediction (`None` before any class was
    /// learnable).
    pub prediction_log: Vec<(u32, Option<u32>)>,
}

struct BufferEntry {
    tokenized: TokenizedText,
    counts: SparseCounts,
    class: u32,
}

fn sample_buffer(config: &RunConfig, buffer: &[BufferEntry], seed: u64) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "sample", 0));
    if config.method == SamplingMethod::Random {
        return uniform_sample_without_replacement(buffer.len(), config.sample_size, &mut rng);
    }
    let base = match config.method {
        SamplingMethod::Length | SamplingMethod::LengthClass => {
            let counts: Vec<usize> = buffer.iter().map(|e| e.tokenized.token_count).collect();
            length_weights(&counts)?
        }
        SamplingMethod::Tfidf | SamplingMethod::TfidfClass => {
            let docs: Vec<Vec<&str>> = buffer
                .iter()
                .map(|e| e.tokenized.tokens.iter().map(String::as_str).collect())
                .collect();
            let table = DocumentFrequencyTable::from_docs(&docs)?;
            tfidf_weights(&docs, &table)?
        }
        SamplingMethod::WpRatio | SamplingMethod::WpRatioClass => {
            let texts: Vec<TokenizedText> = buffer.iter().map(|e| e.tokenized.clone()).collect();
            wp_ratio_weights(&texts)?
        }
        SamplingMethod::Random | SamplingMethod::None => unreachable!("handled above"),
    };
    let classes: Vec<u32> = buffer.iter().map(|e| e.class).collect();
    let candidates = weighted_candidates(
        &base,
        config
            .method
            .uses_class_adjustment()
            .then_some(&classes[..]),
    )?;
    let probabilities: Vec<f64> = candidates.iter().map(|c| c.probability).collect();
    weighted_sample_without_replacement(&probabilities, config.sample_size, &mut rng)
}

/// Runs one prequential scenario with the standard SVM classifier.
pub fn run_scenario(
    config: &RunConfig,
    dataset: &[StreamItem],
    vocab: &Vocabulary,
    seed: u64,
) -> Result<RunResult> {
    run_scenario_with_classifier(config, dataset, vocab, seed, |dim| {
        SvmClassifier::new(dim, config.lambda)
    })
}

/// [`run_scenario`] with a caller-supplied classifier, which tests use to
/// instrument the test-then-train contract.
pub fn run_scenario_with_classifier<C: OnlineClassifier>(
    config: &RunConfig,
    dataset: &[StreamItem],
    vocab: &Vocabulary,
    seed: u64,
    make_classifier: impl FnOnce(usize) -> C,
) -> Result<RunResult> {
    config.validate()?;
    let stream = stratified_stream(
        dataset,
        config.stream_length,
        derive_seed(seed, "stream", 0),
    )?;
    // The label space is dataset metadata: pair labels need it even when
    // some classes arrive only after the trigger.
    let n_classes = dataset.iter().map(|i| i.class).max().unwrap_or(0) as usize + 1;

    let mut embedder = EmbedderState::new(
        config.hash_dim,
        config.out_dim,
        derive_seed(seed, "embedder", 0),
    );
    let mut classifier = make_classifier(config.out_dim);
    let mut metrics = MetricsAccumulator::new();
    let mut buffer: Vec<BufferEntry> = Vec::with_capacity(config.buffer_size.min(stream.len()));
    let mut trajectory = Vec::new();
    let mut prediction_log = Vec::with_capacity(stream.len());
    let mut train_report = None;

    let started = std::time::Instant::now();
    for (index, item) in stream.iter().enumerate() {
        if index == config.buffer_size && !config.method.is_baseline() {
            let selected = sample_buffer(config, &buffer, seed)?;
            let samples: Vec<TrainSample> = selected
                .into_iter()
                .map(|i| TrainSample {
                    counts: buffer[i].counts.clone(),
                    class_id: buffer[i].class,
                })
                .collect();
            let (tuned, report) = finetune(
                &embedder,
                &samples,
                config.loss,
                &config.schedule,
                n_classes,
                derive_seed(seed, "finetune", 0),
            )?;
            embedder = tuned;
            train_report = Some(report);
        }

        let tokenized = tokenize(&item.text, vocab);
        let counts = featurize(&tokenized.pieces, config.hash_dim);
        let embedding = embedder.embed(&counts)?;
        let prediction = match classifier.predict(&embedding) {
            Ok(class) => Some(class),
            Err(Error::NoClassesSeen) => None,
            Err(e) => return Err(e),
        };
        metrics.record(item.class, prediction);
        prediction_log.push((item.class, prediction));
        classifier.learn(&embedding, item.class)?;

        if index < config.buffer_size {
            buffer.push(BufferEntry {
                tokenized,
                counts,
                class: item.class,
            });
        }
        debug_assert!(buffer.len() <= config.buffer_size);

        if (index + 1) % config.trajectory_every == 0 {
            trajectory.push((index + 1, metrics.macro_f1()?));
        }
    }
    let elapsed_seconds = started.elapsed().as_secs_f64();

    let final_macro_f1 = metrics.macro_f1()?;
    if trajectory.last().map(|&(i, _)| i) != Some(stream.len()) {
        trajectory.push((stream.len(), final_macro_f1));
    }
    Ok(RunResult {
        final_macro_f1,
        trajectory,
        elapsed_seconds,
        train_report,
        final_embedder_version: embedder.version(),
        prediction_log,
    })
}

/// Runs a baseline scenario over externally precomputed per-item vectors
/// instead of the hash embedder. A file of frozen vectors cannot be
/// finetuned, so only the baseline method is accepted.
pub fn run_scenario_with_file_embedder(
    config: &RunConfig,
    dataset: &[StreamItem],
    embedder: &crate::embedder::FileEmbedder,
    seed: u64,
) -> Result<RunResult> {
    if !config.method.is_baseline() {
        return Err(Error::InvalidConfig(
            "a file embedder is frozen; only sampling_methods = none can use one \
             (keys embedding_file, sampling_methods)"
                .into(),
        ));
    }
    config.validate()?;
    let stream = stratified_stream(
        dataset,
        config.stream_length,
        derive_seed(seed, "stream", 0),
    )?;
    let mut classifier = SvmClassifier::new(embedder.dim(), config.lambda);
    let mut metrics = MetricsAccumulator::new();
    let mut trajectory = Vec::new();
    let mut prediction_log = Vec::with_capacity(stream.len());

    let started = std::time::Instant::now();
    for (index, item) in stream.iter().enumerate() {
        let embedding = embedder.lookup(&item.id)?;
        let prediction = match classifier.predict(embedding) {
            Ok(class) => Some(class),
            Err(Error::NoClassesSeen) => None,
            Err(e) => return Err(e),
        };
        metrics.record(item.class, prediction);
        prediction_log.push((item.class, prediction));
        classifier.learn(embedding, item.class)?;
        if (index + 1) % config.trajectory_every == 0 {
            trajectory.push((index + 1, metrics.macro_f1()?));
        }
    }
    let elapsed_seconds = started.elapsed().as_secs_f64();

    let final_macro_f1 = metrics.macro_f1()?;
    if trajectory.last().map(|&(i, _)| i) != Some(stream.len()) {
        trajectory.push((stream.len(), final_macro_f1));
    }
    Ok(RunResult {
        final_macro_f1,
        trajectory,
        elapsed_seconds,
        train_report: None,
        final_embedder_version: 0,
        prediction_log,
    })
}

/// One repetition's outcome inside an experiment.
#[derive(Debug)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub repetition: usize,
    pub seed: u64,
    pub result: Result<RunResult>,
}

/// Runs every config `repetitions` times, in parallel, preserving grid
/// order in the output. A failing run is recorded as an `Err` outcome and
/// never blocks its siblings.
pub fn run_experiment(
    grid: &[RunConfig],
    dataset: &[StreamItem],
    vocab: &Vocabulary,
) -> Vec<RunOutcome> {
    let jobs: Vec<(&RunConfig, usize)> = grid
        .iter()
        .flat_map(|config| (0..config.repetitions).map(move |rep| (config, rep)))
        .collect();
    jobs.into_par_iter()
        .map(|(config, repetition)| {
            let seed = config.repetition_seed(repetition);
            RunOutcome {
                config: config.clone(),
                repetition,
                seed,
                result: run_scenario(config, dataset, vocab, seed),
            }
        })
        .collect()
}

/// Mean and population standard deviation; `None` on empty input.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, variance.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::synth::{synth_drift_stream, SynthParams};
    use std::cell::Cell;

    fn small_config(method: SamplingMethod, loss: LossKind) -> RunConfig {
        RunConfig {
            stream_length: 400,
            buffer_size: 100,
            sample_size: 40,
            method,
            loss,
            repetitions: 2,
            master_seed: 11,
            hash_dim: 64,
            out_dim: 8,
            trajectory_every: 50,
            schedule: Schedule {
                epochs: 3,
                ..Schedule::default()
            },
            ..RunConfig::default()
        }
    }

    /// Equality modulo wall-clock fields, which legitimately vary between
    /// otherwise identical runs.
    fn assert_same_modulo_timing(a: &RunResult, b: &RunResult) {
        assert_eq!(a.final_macro_f1.to_bits(), b.final_macro_f1.to_bits());
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(a.final_embedder_version, b.final_embedder_version);
        assert_eq!(a.prediction_log, b.prediction_log);
        match (&a.train_report, &b.train_report) {
            (None, None) => {}
            (Some(ra), Some(rb)) => {
                assert_eq!(ra.initial_loss.to_bits(), rb.initial_loss.to_bits());
                assert_eq!(ra.final_loss.to_bits(), rb.final_loss.to_bits());
                assert_eq!(ra.steps, rb.steps);
            }
            _ => panic!("one run finetuned, the other did not"),
        }
    }

    fn small_stream() -> (Vec<StreamItem>, Vocabulary) {
        synth_drift_stream(&SynthParams {
            n_items: 400,
            n_classes: 3,
            drift_point: 100,
            vocab_shift_fraction: 0.5,
            seed: 3,
        })
        .unwrap()
    }

    #[test]
    fn config_validation_names_offending_keys() {
        let mut config = small_config(SamplingMethod::Random, LossKind::Batl);
        config.sample_size = 101;
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("sample_size"), "{err}");
        assert!(err.to_string().contains("buffer_size"), "{err}");

        let mut config = small_config(SamplingMethod::None, LossKind::Batl);
        config.buffer_size = 500;
        assert!(config.validate().is_err());

        // Baseline ignores sample_size entirely.
        let mut config = small_config(SamplingMethod::None, LossKind::Batl);
        config.sample_size = 0;
        assert!(config.validate().is_ok());
    }

    #[test]
    fn run_ids_encode_the_grid_point() {
        let config = small_config(SamplingMethod::WpRatioClass, LossKind::Sl);
        assert_eq!(config.run_id(2), "wpratio_class_SL_40_rep2");
        let baseline = small_config(SamplingMethod::None, LossKind::Sl);
        assert_eq!(baseline.run_id(0), "none_rep0");
    }

    #[test]
    fn method_strings_round_trip() {
        for method in SamplingMethod::ALL {
            assert_eq!(method.as_str().parse::<SamplingMethod>().unwrap(), method);
        }
        assert!("td-idf".parse::<SamplingMethod>().is_err());
    }

    #[test]
    fn baseline_never_finetunes() {
        let (stream, vocab) = small_stream();
        let config = small_config(SamplingMethod::None, LossKind::Batl);
        let result = run_scenario(&config, &stream, &vocab, 1).unwrap();
        assert_eq!(result.final_embedder_version, 0);
        assert!(result.train_report.is_none());
    }

    #[test]
    fn baseline_is_invariant_to_loss_and_sample_size() {
        let (stream, vocab) = small_stream();
        let a = run_scenario(
            &small_config(SamplingMethod::None, LossKind::Batl),
            &stream,
            &vocab,
            1,
        )
        .unwrap();
        let mut other = small_config(SamplingMethod::None, LossKind::Ctl);
        other.sample_size = 7;
        let b = run_scenario(&other, &stream, &vocab, 1).unwrap();
        assert_same_modulo_timing(&a, &b);
    }

    #[test]
    fn trigger_bumps_embedder_version_once() {
        let (stream, vocab) = small_stream();
        for method in [
            SamplingMethod::Random,
            SamplingMethod::Length,
            SamplingMethod::TfidfClass,
            SamplingMethod::WpRatioClass,
        ] {
            let config = small_config(method, LossKind::Batl);
            let result = run_scenario(&config, &stream, &vocab, 5).unwrap();
            assert_eq!(result.final_embedder_version, 1, "{method}");
            let report = result.train_report.expect("finetune ran");
            assert!(report.steps > 0);
        }
    }

    #[test]
    fn runs_are_deterministic_per_seed() {
        let (stream, vocab) = small_stream();
        let config = small_config(SamplingMethod::Tfidf, LossKind::Ocl);
        let a = run_scenario(&config, &stream, &vocab, 9).unwrap();
        let b = run_scenario(&config, &stream, &vocab, 9).unwrap();
        assert_same_modulo_timing(&a, &b);
        let c = run_scenario(&config, &stream, &vocab, 10).unwrap();
        assert_ne!(a.prediction_log, c.prediction_log);
    }

    #[test]
    fn trajectory_checkpoints_every_k_and_at_the_end() {
        let (stream, vocab) = small_stream();
        let mut config = small_config(SamplingMethod::None, LossKind::Batl);
        config.trajectory_every = 150;
        let result = run_scenario(&config, &stream, &vocab, 2).unwrap();
        // 400 items, k = 150: checkpoints at 150, 300, then the final 400.
        let indices: Vec<usize> = result.trajectory.iter().map(|&(i, _)| i).collect();
        assert_eq!(indices, vec![150, 300, 400]);
        assert_eq!(result.trajectory.last().unwrap().1, result.final_macro_f1);
    }

    /// Classifier spy asserting strict predict-then-learn alternation.
    struct SpyClassifier {
        predicted: Cell<usize>,
        learned: Cell<usize>,
    }

    impl OnlineClassifier for SpyClassifier {
        fn predict(&self, _x: &[f64]) -> Result<u32> {
            assert_eq!(
                self.predicted.get(),
                self.learned.get(),
                "predict ran twice without an intervening learn"
            );
            self.predicted.set(self.predicted.get() + 1);
            Ok(0)
        }

        fn learn(&mut self, _x: &[f64], _y: u32) -> Result<()> {
            assert_eq!(
                self.predicted.get(),
                self.learned.get() + 1,
                "learn ran before the item was predicted"
            );
            self.learned.set(self.learned.get() + 1);
            Ok(())
        }

        fn n_classes(&self) -> usize {
            1
        }
    }

    #[test]
    fn every_item_is_predicted_before_it_is_learned() {
        let (stream, vocab) = small_stream();
        let config = small_config(SamplingMethod::Random, LossKind::Batl);
        let result = run_scenario_with_classifier(&config, &stream, &vocab, 4, |_| SpyClassifier {
            predicted: Cell::new(0),
            learned: Cell::new(0),
        })
        .unwrap();
        // The spy's internal assertions carry the ordering contract; here we
        // check the loop visited every item exactly once via the log.
        assert_eq!(result.prediction_log.len(), config.stream_length);
    }

    #[test]
    fn file_embedder_runs_baseline_only() {
        use std::io::Write as _;
        let items: Vec<StreamItem> = (0..10)
            .map(|i| StreamItem {
                id: format!("item-{i}"),
                text: "unused".into(),
                class: (i % 2) as u32,
                timestamp: i as i64,
            })
            .collect();
        let mut file = tempfile::NamedTempFile::new().unwrap();
        for (i, item) in items.iter().enumerate() {
            // Classes sit on opposite axes, so the SVM separates quickly.
            let (x, y) = if i % 2 == 0 { (1.0, 0.1) } else { (0.1, 1.0) };
            writeln!(file, "{}\t{x},{y}", item.id).unwrap();
        }
        let embedder = crate::embedder::FileEmbedder::from_path(file.path()).unwrap();

        let mut config = small_config(SamplingMethod::None, LossKind::Batl);
        config.stream_length = 10;
        config.buffer_size = 10;
        let result = run_scenario_with_file_embedder(&config, &items, &embedder, 3).unwrap();
        assert_eq!(result.prediction_log.len(), 10);
        assert_eq!(result.final_embedder_version, 0);
        assert!(result.final_macro_f1 > 0.7, "{}", result.final_macro_f1);

        config.method = SamplingMethod::Random;
        config.sample_size = 5;
        let err = run_scenario_with_file_embedder(&config, &items, &embedder, 3).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)), "{err}");

        // A stream item missing from the file aborts the run.
        let mut missing = items.clone();
        missing[4].id = "absent".into();
        config.method = SamplingMethod::None;
        let err = run_scenario_with_file_embedder(&config, &missing, &embedder, 3).unwrap_err();
        assert!(matches!(err, Error::EmbeddingNotFound(_)), "{err}");
    }

    #[test]
    fn experiment_repeats_with_distinct_seeds_in_grid_order() {
        let (stream, vocab) = small_stream();
        let grid = vec![
            small_config(SamplingMethod::None, LossKind::Batl),
            small_config(SamplingMethod::Random, LossKind::Batl),
        ];
        let outcomes = run_experiment(&grid, &stream, &vocab);
        assert_eq!(outcomes.len(), 4); // 2 configs × 2 repetitions
        assert_eq!(outcomes[0].config.method, SamplingMethod::None);
        assert_eq!(outcomes[1].config.method, SamplingMethod::None);
        assert_eq!(outcomes[2].config.method, SamplingMethod::Random);
        assert_eq!(outcomes[0].repetition, 0);
        assert_eq!(outcomes[1].repetition, 1);
        assert_ne!(outcomes[0].seed, outcomes[1].seed);
        assert!(outcomes.iter().all(|o| o.result.is_ok()));
    }

    #[test]
    fn failing_runs_do_not_block_siblings() {
        let (stream, vocab) = small_stream();
        let good = small_config(SamplingMethod::None, LossKind::Batl);
        let mut bad = good.clone();
        bad.stream_length = stream.len() + 1; // stratified draw must fail
        bad.buffer_size = bad.stream_length;
        let outcomes = run_experiment(&[bad, good], &stream, &vocab);
        assert!(outcomes[..2].iter().all(|o| o.result.is_err()));
        assert!(outcomes[2..].iter().all(|o| o.result.is_ok()));
    }

    #[test]
    fn mean_std_matches_hand_computation() {
        let (mean, std) = mean_std(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(mean, 2.5);
        assert!((std - (1.25f64).sqrt()).abs() < 1e-15);
        let (_, zero_std) = mean_std(&[0.7, 0.7, 0.7]).unwrap();
        assert!(zero_std.abs() < 1e-15);
        assert!(mean_std(&[]).is_none());
    }
}
