//! Subcommand implementations.
//!
//! Error handling follows one rule: exit code 1 means the experiment
//! itself failed at runtime (one or more runs errored), exit code 2 means
//! the inputs were unusable (flags, config file, referenced data files).
//! Diagnostics go to standard error; payload output (JSON, CSV, file
//! paths) goes to standard output or the configured output directory.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use streamtune_core::harness::report::{render_results_csv, render_trajectory_csv, ResultRow};
use streamtune_core::harness::scenario::{
    run_experiment, run_scenario_with_file_embedder, RunOutcome,
};
use streamtune_core::harness::stream::load_jsonl;
use streamtune_core::harness::synth::{synth_drift_stream, SynthParams};
use streamtune_core::sampler::{
    uniform_sample_without_replacement, weighted_candidates, weighted_sample_without_replacement,
};
use streamtune_core::tokenizer::{tokenize, TokenizedText, Vocabulary};
use streamtune_core::weighting::{
    length_weights, tfidf_weights, wp_ratio_weights, DocumentFrequencyTable,
};
use streamtune_core::{FileEmbedder, SamplingMethod};

use rand::SeedableRng as _;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, TimingMode};

pub enum CliError {
    /// Unusable inputs: flags, config keys or values, referenced files.
    Config(String),
    /// The experiment executed but one or more runs failed.
    Runtime(String),
}

impl CliError {
    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

type CliResult = Result<(), CliError>;

fn config_error(message: impl Display) -> CliError {
    CliError::Config(message.to_string())
}

fn read_error(what: &str, path: &Path, error: impl Display) -> CliError {
    config_error(format!("cannot load {what} {}: {error}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// `run --config PATH [--jobs N]`
pub fn cmd_run(config_path: &Path, jobs: Option<usize>) -> CliResult {
    if jobs == Some(0) {
        return Err(config_error("--jobs must be at least 1"));
    }
    let text = fs::read_to_string(config_path).map_err(|e| read_error("config", config_path, e))?;
    let config = ExperimentConfig::parse(&text).map_err(config_error)?;

    let dataset =
        load_jsonl(&config.dataset).map_err(|e| read_error("dataset", &config.dataset, e))?;
    let vocab = Vocabulary::from_path(&config.vocabulary, config.unk_piece_count)
        .map_err(|e| read_error("vocabulary", &config.vocabulary, e))?;
    let dataset_name = config
        .dataset
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| config.dataset.display().to_string());

    let outcomes = match &config.embedding_file {
        Some(path) => {
            let embedder =
                FileEmbedder::from_path(path).map_err(|e| read_error("embedding file", path, e))?;
            let run = config.baseline_run_config();
            (0..run.repetitions)
                .map(|repetition| {
                    let seed = run.repetition_seed(repetition);
                    RunOutcome {
                        config: run.clone(),
                        repetition,
                        seed,
                        result: run_scenario_with_file_embedder(&run, &dataset, &embedder, seed),
                    }
                })
                .collect()
        }
        None => {
            let grid = config.grid();
            match jobs {
                Some(n) => {
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build()
                        .map_err(|e| CliError::Runtime(format!("cannot start {n} workers: {e}")))?;
                    pool.install(|| run_experiment(&grid, &dataset, &vocab))
                }
                None => run_experiment(&grid, &dataset, &vocab),
            }
        }
    };

    fs::create_dir_all(&config.output_dir).map_err(|e| {
        CliError::Runtime(format!(
            "cannot create {}: {e}",
            config.output_dir.display()
        ))
    })?;
    let echo = config.echo();
    let zero_timing = config.timing_mode == TimingMode::Fixed;

    let mut rows = Vec::new();
    let mut failures = 0usize;
    for outcome in &outcomes {
        let run_id = outcome.config.run_id(outcome.repetition);
        match &outcome.result {
            Ok(result) => {
                rows.push(ResultRow::from_outcome(outcome, &dataset_name).expect("ok outcome"));
                let mut run_echo = echo.clone();
                run_echo.push(("run_id".into(), run_id.clone()));
                run_echo.push(("repetition".into(), outcome.repetition.to_string()));
                run_echo.push(("seed".into(), outcome.seed.to_string()));
                let path = config.output_dir.join(format!("trajectory_{run_id}.csv"));
                write_file(&path, &render_trajectory_csv(&run_echo, &result.trajectory))?;
            }
            Err(error) => {
                failures += 1;
                eprintln!("run {run_id} failed: {error}");
            }
        }
    }

    let results_path = config.output_dir.join("results.csv");
    write_file(
        &results_path,
        &render_results_csv(&echo, &rows, zero_timing),
    )?;
    println!("wrote {} ({} rows)", results_path.display(), rows.len());

    if failures > 0 {
        Err(CliError::Runtime(format!(
            "{failures} of {} runs failed",
            outcomes.len()
        )))
    } else {
        Ok(())
    }
}

/// `synth --items N --classes K --drift-at I --shift F --seed S --out DIR`
pub fn cmd_synth(
    items: usize,
    classes: usize,
    drift_at: usize,
    shift: f64,
    seed: u64,
    out: &Path,
) -> CliResult {
    let params = SynthParams {
        n_items: items,
        n_classes: classes,
        drift_point: drift_at,
        vocab_shift_fraction: shift,
        seed,
    };
    let (stream, vocab) = synth_drift_stream(&params).map_err(config_error)?;
    fs::create_dir_all(out)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;

    let dataset_path = out.join("synth.jsonl");
    write_file(
        &dataset_path,
        &streamtune_core::harness::stream::to_jsonl(&stream),
    )?;

    let mut entries: Vec<&str> = vocab.entries().collect();
    entries.sort_unstable();
    let mut vocab_text = entries.join("\n");
    vocab_text.push('\n');
    let vocab_path = out.join("synth.vocab");
    write_file(&vocab_path, &vocab_text)?;

    println!("wrote {}", dataset_path.display());
    println!("wrote {}", vocab_path.display());
    Ok(())
}

/// `tokenize --vocab PATH --text STR`
pub fn cmd_tokenize(vocab_path: &Path, text: &str) -> CliResult {
    let vocab = Vocabulary::from_path(vocab_path, 2)
        .map_err(|e| read_error("vocabulary", vocab_path, e))?;
    let tokenized = tokenize(text, &vocab);
    let value = serde_json::json!({
        "tokens": tokenized.tokens,
        "pieces": tokenized.pieces,
        "token_count": tokenized.token_count,
        "wordpiece_count": tokenized.wordpiece_count,
        "ratio": tokenized.piece_token_ratio(),
    });
    println!("{value}");
    Ok(())
}

/// `sample --dataset PATH --vocab PATH --method M --n S --seed S [--class-adjust]`
pub fn cmd_sample(
    dataset_path: &Path,
    vocab_path: &Path,
    method: &str,
    n: usize,
    seed: u64,
    class_adjust: bool,
) -> CliResult {
    let method: SamplingMethod = method.parse().map_err(config_error)?;
    if method.is_baseline() {
        return Err(config_error("method none draws no sample"));
    }
    let dataset = load_jsonl(dataset_path).map_err(|e| read_error("dataset", dataset_path, e))?;
    let vocab = Vocabulary::from_path(vocab_path, 2)
        .map_err(|e| read_error("vocabulary", vocab_path, e))?;

    let tokenized: Vec<TokenizedText> = dataset
        .iter()
        .map(|item| tokenize(&item.text, &vocab))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    println!("id,weight,probability");
    if method == SamplingMethod::Random {
        let selected =
            uniform_sample_without_replacement(dataset.len(), n, &mut rng).map_err(config_error)?;
        let probability = 1.0 / dataset.len() as f64;
        for index in selected {
            println!("{},1.000000,{probability:.6}", dataset[index].id);
        }
        return Ok(());
    }

    let base = match method {
        SamplingMethod::Length | SamplingMethod::LengthClass => {
            let counts: Vec<usize> = tokenized.iter().map(|t| t.token_count).collect();
            length_weights(&counts)
        }
        SamplingMethod::Tfidf | SamplingMethod::TfidfClass => {
            let docs: Vec<Vec<&str>> = tokenized
                .iter()
                .map(|t| t.tokens.iter().map(String::as_str).collect())
                .collect();
            DocumentFrequencyTable::from_docs(&docs).and_then(|table| tfidf_weights(&docs, &table))
        }
        SamplingMethod::WpRatio | SamplingMethod::WpRatioClass => wp_ratio_weights(&tokenized),
        SamplingMethod::Random | SamplingMethod::None => unreachable!("handled above"),
    }
    .map_err(config_error)?;

    let classes: Vec<u32> = dataset.iter().map(|item| item.class).collect();
    let adjust = class_adjust || method.uses_class_adjustment();
    let candidates =
        weighted_candidates(&base, adjust.then_some(&classes[..])).map_err(config_error)?;
    let probabilities: Vec<f64> = candidates.iter().map(|c| c.probability).collect();
    let selected =
        weighted_sample_without_replacement(&probabilities, n, &mut rng).map_err(config_error)?;
    for index in selected {
        let candidate = &candidates[index];
        println!(
            "{},{:.6},{:.6}",
            dataset[index].id, candidate.adjusted_weight, candidate.probability
        );
    }
    Ok(())
}
