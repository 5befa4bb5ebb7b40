//! Experiment configuration: a line-oriented `key = value` file.
//!
//! Lines whose first non-blank character is `#` are comments; blank lines
//! are ignored. Every key has a documented default except the three file
//! locations (`dataset`, `vocabulary`, `output_dir`), which must be given.
//! Unknown and duplicate keys are rejected outright — a silently ignored
//! typo in an experiment config is worse than a failed start. The fully
//! resolved configuration round-trips through [`ExperimentConfig::echo`]
//! into every results file.

use std::collections::BTreeSet;
use std::path::PathBuf;

use streamtune_core::finetune::Schedule;
use streamtune_core::{LossKind, RunConfig, SamplingMethod};

/// Whether emitted wall-clock columns report real time or a fixed zero.
///
/// `fixed` exists for byte-exact determinism checks: two runs of the same
/// configuration then produce identical results files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimingMode {
    Wall,
    Fixed,
}

impl TimingMode {
    fn as_str(self) -> &'static str {
        match self {
            TimingMode::Wall => "wall",
            TimingMode::Fixed => "fixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub vocabulary: PathBuf,
    /// Frozen per-item vectors; only valid with `sampling_methods = none`.
    pub embedding_file: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub stream_length: usize,
    pub buffer_size: usize,
    pub sample_sizes: Vec<usize>,
    pub sampling_methods: Vec<SamplingMethod>,
    pub loss_kinds: Vec<LossKind>,
    pub repetitions: usize,
    pub master_seed: u64,
    pub hash_dim: usize,
    pub out_dim: usize,
    pub unk_piece_count: usize,
    pub lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub warmup_steps: usize,
    pub peak_lr: f64,
    pub margin: f64,
    pub ctl_negative_ratio: usize,
    pub trajectory_every: usize,
    pub timing_mode: TimingMode,
}

/// Every recognized key, used for unknown-key diagnostics.
const KNOWN_KEYS: [&str; 23] = [
    "dataset",
    "vocabulary",
    "embedding_file",
    "output_dir",
    "stream_length",
    "buffer_size",
    "sample_sizes",
    "sampling_methods",
    "loss_kinds",
    "repetitions",
    "master_seed",
    "hash_dim",
    "out_dim",
    "unk_piece_count",
    "lambda",
    "epochs",
    "batch_size",
    "warmup_steps",
    "peak_lr",
    "margin",
    "ctl_negative_ratio",
    "trajectory_every",
    "timing_mode",
];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value {value:?} for {key} (line {line})"))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<Vec<T>, String> {
    let items: Vec<&str> = value.split(',').map(str::trim).collect();
    if items.iter().any(|s| s.is_empty()) {
        return Err(format!("empty entry in {key} list (line {line})"));
    }
    items
        .into_iter()
        .map(|s| parse_value(key, s, line))
        .collect()
}

fn reject_duplicates<T: std::fmt::Display + PartialEq>(
    key: &str,
    values: &[T],
) -> Result<(), String> {
    for (i, value) in values.iter().enumerate() {
        if values[..i].iter().any(|prior| prior == value) {
            return Err(format!("duplicate entry {value} in {key}"));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses and validates a configuration document.
    pub fn parse(text: &str) -> Result<ExperimentConfig, String> {
        let mut dataset = None;
        let mut vocabulary = None;
        let mut embedding_file = None;
        let mut output_dir = None;
        let defaults = RunConfig::default();
        let schedule = Schedule::default();
        let mut config = ExperimentConfig {
            dataset: PathBuf::new(),
            vocabulary: PathBuf::new(),
            embedding_file: None,
            output_dir: PathBuf::new(),
            stream_length: defaults.stream_length,
            buffer_size: defaults.buffer_size,
            sample_sizes: vec![500, 1000, 2500, 5000],
            sampling_methods: SamplingMethod::ALL.to_vec(),
            loss_kinds: LossKind::ALL.to_vec(),
            repetitions: defaults.repetitions,
            master_seed: defaults.master_seed,
            hash_dim: defaults.hash_dim,
            out_dim: defaults.out_dim,
            unk_piece_count: defaults.unk_piece_count,
            lambda: defaults.lambda,
            epochs: schedule.epochs,
            batch_size: schedule.batch_size,
            warmup_steps: schedule.warmup_steps,
            peak_lr: schedule.peak_lr,
            margin: schedule.margin,
            ctl_negative_ratio: schedule.ctl_negative_ratio,
            trajectory_every: defaults.trajectory_every,
            timing_mode: TimingMode::Wall,
        };

        let mut seen = BTreeSet::new();
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| format!("expected `key = value`, got {trimmed:?} (line {line})"))?;
            let (key, value) = (key.trim(), value.trim());
            if !KNOWN_KEYS.contains(&key) {
                return Err(format!("unknown configuration key {key:?} (line {line})"));
            }
            if !seen.insert(key.to_string()) {
                return Err(format!("duplicate configuration key {key:?} (line {line})"));
            }
            match key {
                "dataset" => dataset = Some(PathBuf::from(value)),
                "vocabulary" => vocabulary = Some(PathBuf::from(value)),
                "embedding_file" => embedding_file = Some(PathBuf::from(value)),
                "output_dir" => output_dir = Some(PathBuf::from(value)),
                "stream_length" => config.stream_length = parse_value(key, value, line)?,
                "buffer_size" => config.buffer_size = parse_value(key, value, line)?,
                "sample_sizes" => config.sample_sizes = parse_list(key, value, line)?,
                "sampling_methods" => config.sampling_methods = parse_list(key, value, line)?,
                "loss_kinds" => config.loss_kinds = parse_list(key, value, line)?,
                "repetitions" => config.repetitions = parse_value(key, value, line)?,
                "master_seed" => config.master_seed = parse_value(key, value, line)?,
                "hash_dim" => config.hash_dim = parse_value(key, value, line)?,
                "out_dim" => config.out_dim = parse_value(key, value, line)?,
                "unk_piece_count" => config.unk_piece_count = parse_value(key, value, line)?,
                "lambda" => config.lambda = parse_value(key, value, line)?,
                "epochs" => config.epochs = parse_value(key, value, line)?,
                "batch_size" => config.batch_size = parse_value(key, value, line)?,
                "warmup_steps" => config.warmup_steps = parse_value(key, value, line)?,
                "peak_lr" => config.peak_lr = parse_value(key, value, line)?,
                "margin" => config.margin = parse_value(key, value, line)?,
                "ctl_negative_ratio" => config.ctl_negative_ratio = parse_value(key, value, line)?,
                "trajectory_every" => config.trajectory_every = parse_value(key, value, line)?,
                "timing_mode" => {
                    config.timing_mode = match value {
                        "wall" => TimingMode::Wall,
                        "fixed" => TimingMode::Fixed,
                        other => {
                            return Err(format!(
                                "invalid value {other:?} for timing_mode (line {line}); \
                                 expected wall or fixed"
                            ))
                        }
                    }
                }
                _ => unreachable!("key membership checked above"),
            }
        }

        let mut missing = Vec::new();
        match dataset {
            Some(path) => config.dataset = path,
            None => missing.push("dataset"),
        }
        match vocabulary {
            Some(path) => config.vocabulary = path,
            None => missing.push("vocabulary"),
        }
        match output_dir {
            Some(path) => config.output_dir = path,
            None => missing.push("output_dir"),
        }
        if !missing.is_empty() {
            return Err(format!("missing required keys: {}", missing.join(", ")));
        }
        config.embedding_file = embedding_file;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), String> {
        if self.sample_sizes.is_empty()
            || self.sampling_methods.is_empty()
            || self.loss_kinds.is_empty()
        {
            return Err("sample_sizes, sampling_methods, and loss_kinds must be non-empty".into());
        }
        reject_duplicates("sample_sizes", &self.sample_sizes)?;
        reject_duplicates("sampling_methods", &self.sampling_methods)?;
        reject_duplicates("loss_kinds", &self.loss_kinds)?;
        if self.buffer_size == 0 || self.buffer_size > self.stream_length {
            return Err(format!(
                "buffer_size {} must be in 1..=stream_length {} (keys buffer_size, stream_length)",
                self.buffer_size, self.stream_length
            ));
        }
        let needs_samples = self.sampling_methods.iter().any(|m| !m.is_baseline());
        if needs_samples {
            for &n in &self.sample_sizes {
                if n == 0 || n > self.buffer_size {
                    return Err(format!(
                        "sample size {n} must be in 1..=buffer_size {} \
                         (keys sample_sizes, buffer_size)",
                        self.buffer_size
                    ));
                }
            }
        }
        if self.embedding_file.is_some() && self.sampling_methods != [SamplingMethod::None] {
            return Err(
                "a file embedder is frozen, so embedding_file requires sampling_methods = none \
                 (keys embedding_file, sampling_methods)"
                    .into(),
            );
        }
        // Per-run numeric checks are shared with the library validator.
        self.baseline_run_config()
            .validate()
            .map_err(|e| e.to_string())
    }

    fn schedule(&self) -> Schedule {
        Schedule {
            epochs: self.epochs,
            batch_size: self.batch_size,
            warmup_steps: self.warmup_steps,
            peak_lr: self.peak_lr,
            margin: self.margin,
            ctl_negative_ratio: self.ctl_negative_ratio,
        }
    }

    fn run_config(&self, method: SamplingMethod, loss: LossKind, sample_size: usize) -> RunConfig {
        RunConfig {
            stream_length: self.stream_length,
            buffer_size: self.buffer_size,
            sample_size,
            method,
            loss,
            repetitions: self.repetitions,
            master_seed: self.master_seed,
            hash_dim: self.hash_dim,
            out_dim: self.out_dim,
            unk_piece_count: self.unk_piece_count,
            lambda: self.lambda,
            schedule: self.schedule(),
            trajectory_every: self.trajectory_every,
        }
    }

    /// The single baseline point (loss and sample size do not apply).
    pub fn baseline_run_config(&self) -> RunConfig {
        self.run_config(SamplingMethod::None, LossKind::Batl, 0)
    }

    /// Expands the configured sets into the grid of runs, in output order:
    /// methods outermost, then losses, then sample sizes. The baseline
    /// collapses to a single point.
    pub fn grid(&self) -> Vec<RunConfig> {
        let mut grid = Vec::new();
        for &method in &self.sampling_methods {
            if method.is_baseline() {
                grid.push(self.baseline_run_config());
                continue;
            }
            for &loss in &self.loss_kinds {
                for &sample_size in &self.sample_sizes {
                    grid.push(self.run_config(method, loss, sample_size));
                }
            }
        }
        grid
    }

    /// The resolved configuration as ordered `(key, value)` pairs, exactly
    /// as they would appear in a config file.
    pub fn echo(&self) -> Vec<(String, String)> {
        let join = |items: &[String]| items.join(",");
        let mut pairs = vec![
            ("dataset".into(), self.dataset.display().to_string()),
            ("vocabulary".into(), self.vocabulary.display().to_string()),
        ];
        if let Some(path) = &self.embedding_file {
            pairs.push(("embedding_file".into(), path.display().to_string()));
        }
        pairs.extend([
            ("output_dir".into(), self.output_dir.display().to_string()),
            ("stream_length".into(), self.stream_length.to_string()),
            ("buffer_size".into(), self.buffer_size.to_string()),
            (
                "sample_sizes".into(),
                join(
                    &self
                        .sample_sizes
                        .iter()
                        .map(|n| n.to_string())
                        .collect::<Vec<_>>(),
                ),
            ),
            (
                "sampling_methods".into(),
                join(
                    &self
                        .sampling_methods
                        .iter()
                        .map(|m| m.to_string())
                        .collect::<Vec<_>>(),
                ),
            ),
            (
                "loss_kinds".into(),
                join(
                    &self
                        .loss_kinds
                        .iter()
                        .map(|l| l.to_string())
                        .collect::<Vec<_>>(),
                ),
            ),
            ("repetitions".into(), self.repetitions.to_string()),
            ("master_seed".into(), self.master_seed.to_string()),
            ("hash_dim".into(), self.hash_dim.to_string()),
            ("out_dim".into(), self.out_dim.to_string()),
            ("unk_piece_count".into(), self.unk_piece_count.to_string()),
            ("lambda".into(), self.lambda.to_string()),
            ("epochs".into(), self.epochs.to_string()),
            ("batch_size".into(), self.batch_size.to_string()),
            ("warmup_steps".into(), self.warmup_steps.to_string()),
            ("peak_lr".into(), self.peak_lr.to_string()),
            ("margin".into(), self.margin.to_string()),
            (
                "ctl_negative_ratio".into(),
                self.ctl_negative_ratio.to_string(),
            ),
            ("trajectory_every".into(), self.trajectory_every.to_string()),
            ("timing_mode".into(), self.timing_mode.as_str().to_string()),
        ]);
        pairs
    }
}
