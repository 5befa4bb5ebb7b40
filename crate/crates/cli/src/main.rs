//! `streamtune` — run prequential text-stream experiments from the shell.
//!
//! Four subcommands: `run` executes a configured experiment grid, `synth`
//! generates a synthetic drift dataset, and `tokenize` / `sample` expose
//! the tokenizer and the weighted sampler for auditing without a full run.
//!
//! Exit codes: 0 on full success; 1 when experiment runs failed at
//! runtime; 2 for configuration problems (bad flags, bad config keys or
//! values, unreadable input files).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "streamtune",
    version,
    about = "Prequential text-stream mining harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the experiment grid described by a config file.
    Run {
        /// Path to a `key = value` configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Maximum concurrent runs (default: available processors).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Generate a synthetic drift dataset plus its matching vocabulary.
    Synth {
        /// Number of stream items.
        #[arg(long)]
        items: usize,
        /// Number of classes.
        #[arg(long)]
        classes: usize,
        /// Item index at which the vocabulary drifts.
        #[arg(long = "drift-at")]
        drift_at: usize,
        /// Fraction of each class's words replaced at the drift point.
        #[arg(long)]
        shift: f64,
        /// Generator seed.
        #[arg(long)]
        seed: u64,
        /// Output directory for `synth.jsonl` and `synth.vocab`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Tokenize one text against a vocabulary and print the breakdown.
    Tokenize {
        /// Vocabulary file, one piece per line.
        #[arg(long)]
        vocab: PathBuf,
        /// Text to tokenize.
        #[arg(long)]
        text: String,
    },
    /// Weight and sample a dataset once, printing the selection as CSV.
    Sample {
        /// Dataset in JSONL format.
        #[arg(long)]
        dataset: PathBuf,
        /// Vocabulary file, one piece per line.
        #[arg(long)]
        vocab: PathBuf,
        /// Sampling method (random, length, tfidf, wpratio, or *_class).
        #[arg(long)]
        method: String,
        /// Number of items to select.
        #[arg(long)]
        n: usize,
        /// Sampler seed.
        #[arg(long)]
        seed: u64,
        /// Force the class-frequency adjustment regardless of method.
        #[arg(long = "class-adjust")]
        class_adjust: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, jobs } => commands::cmd_run(&config, jobs),
        Command::Synth {
            items,
            classes,
            drift_at,
            shift,
            seed,
            out,
        } => commands::cmd_synth(items, classes, drift_at, shift, seed, &out),
        Command::Tokenize { vocab, text } => commands::cmd_tokenize(&vocab, &text),
        Command::Sample {
            dataset,
            vocab,
            method,
            n,
            seed,
            class_adjust,
        } => commands::cmd_sample(&dataset, &vocab, &method, n, seed, class_adjust),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {}", error.message());
            ExitCode::from(error.exit_code())
        }
    }
}
