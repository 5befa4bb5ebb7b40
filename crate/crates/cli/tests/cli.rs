//! End-to-end tests of the `streamtune` binary: every subcommand exercised
//! through a real process, checking stdout/stderr payloads, exit codes,
//! and on-disk artifacts.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn streamtune(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streamtune"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("utf-8 stderr")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

/// Generates a small synthetic dataset, returning its directory.
fn synth_fixture(dir: &Path) -> (String, String) {
    let out = streamtune(
        &[
            "synth",
            "--items",
            "1200",
            "--classes",
            "3",
            "--drift-at",
            "300",
            "--shift",
            "0.5",
            "--seed",
            "11",
            "--out",
            "data",
        ],
        dir,
    );
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    (
        dir.join("data/synth.jsonl").display().to_string(),
        dir.join("data/synth.vocab").display().to_string(),
    )
}

#[test]
fn synth_writes_deterministic_dataset_and_vocabulary() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, vocab) = synth_fixture(dir.path());
    let first_data = fs::read(&dataset).unwrap();
    let first_vocab = fs::read(&vocab).unwrap();
    assert_eq!(first_data.iter().filter(|&&b| b == b'\n').count(), 1200);
    // The vocabulary is sorted, one entry per line, and non-trivial.
    let vocab_text = String::from_utf8(first_vocab.clone()).unwrap();
    let entries: Vec<&str> = vocab_text.lines().collect();
    let mut sorted = entries.clone();
    sorted.sort_unstable();
    assert_eq!(entries, sorted);
    assert!(entries.len() > 100, "{}", entries.len());

    // Same flags → byte-identical files.
    synth_fixture(dir.path());
    assert_eq!(fs::read(&dataset).unwrap(), first_data);
    assert_eq!(fs::read(&vocab).unwrap(), first_vocab);
}

#[test]
fn tokenize_prints_one_json_object() {
    let dir = tempfile::tempdir().unwrap();
    let vocab = dir.path().join("v.vocab");
    fs::write(&vocab, "great\nplace\n!\ninstitutional\n##ization\n").unwrap();
    let out = streamtune(
        &[
            "tokenize",
            "--vocab",
            vocab.to_str().unwrap(),
            "--text",
            "Great institutionalization!",
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let value: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(
        value["tokens"],
        serde_json::json!(["great", "institutionalization", "!"])
    );
    assert_eq!(value["token_count"], serde_json::json!(3));
    // "institutionalization" has no full segmentation here, so it falls
    // back to [UNK] at the default charge of 2.
    assert_eq!(value["wordpiece_count"], serde_json::json!(4));
    let ratio = value["ratio"].as_f64().unwrap();
    assert!((ratio - 4.0 / 3.0).abs() < 1e-12);
}

#[test]
fn sample_prints_csv_rows_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, vocab) = synth_fixture(dir.path());
    let args = [
        "sample",
        "--dataset",
        &dataset,
        "--vocab",
        &vocab,
        "--method",
        "tfidf",
        "--n",
        "7",
        "--seed",
        "3",
    ];
    let out = streamtune(&args, dir.path());
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "id,weight,probability");
    assert_eq!(lines.len(), 8);
    assert!(lines[1].starts_with("synth-"));

    let again = streamtune(&args, dir.path());
    assert_eq!(stdout(&again), text);

    let bad = streamtune(
        &[
            "sample",
            "--dataset",
            &dataset,
            "--vocab",
            &vocab,
            "--method",
            "none",
            "--n",
            "7",
            "--seed",
            "3",
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&bad), 2);
}

fn write_config(dir: &Path, dataset: &str, vocab: &str, extra: &str) -> String {
    let path = dir.join("exp.conf");
    let out_dir = dir.join("out");
    fs::write(
        &path,
        format!(
            "dataset = {dataset}\nvocabulary = {vocab}\noutput_dir = {}\n\
             stream_length = 1200\nbuffer_size = 300\nsample_sizes = 60\n\
             sampling_methods = none,random\nloss_kinds = BATL\nrepetitions = 2\n\
             hash_dim = 64\nout_dim = 8\nepochs = 2\ntrajectory_every = 400\n\
             timing_mode = fixed\n{extra}",
            out_dir.display()
        ),
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn run_writes_results_and_trajectories_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, vocab) = synth_fixture(dir.path());
    let config = write_config(dir.path(), &dataset, &vocab, "");

    let out = streamtune(&["run", "--config", &config, "--jobs", "2"], dir.path());
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));

    let results_path = dir.path().join("out/results.csv");
    let results = fs::read_to_string(&results_path).unwrap();
    let rows: Vec<&str> = results.lines().filter(|l| !l.starts_with('#')).collect();
    // Header + (baseline + random×BATL×60) × 2 repetitions.
    assert_eq!(rows.len(), 1 + 4);
    assert!(rows[0].starts_with("run_id,dataset,method,loss,sample_size"));
    assert!(results.contains("# master_seed = 42"));
    for run_id in [
        "none_rep0",
        "none_rep1",
        "random_BATL_60_rep0",
        "random_BATL_60_rep1",
    ] {
        assert!(results.contains(run_id), "{run_id} missing:\n{results}");
        let trajectory = dir.path().join(format!("out/trajectory_{run_id}.csv"));
        let text = fs::read_to_string(trajectory).unwrap();
        assert!(text.contains("item_index,cumulative_macro_f1"));
        assert!(text.contains(&format!("# run_id = {run_id}")));
        assert!(text.lines().last().unwrap().starts_with("1200,"));
    }

    // A second invocation reproduces the results file byte for byte.
    let first = fs::read(&results_path).unwrap();
    let again = streamtune(&["run", "--config", &config], dir.path());
    assert_eq!(exit_code(&again), 0);
    assert_eq!(fs::read(&results_path).unwrap(), first);
}

#[test]
fn run_rejects_bad_configs_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, vocab) = synth_fixture(dir.path());

    let config = write_config(dir.path(), &dataset, &vocab, "sample_sizes_typo = 1\n");
    let out = streamtune(&["run", "--config", &config], dir.path());
    assert_eq!(exit_code(&out), 2);
    assert!(
        stderr(&out).contains("sample_sizes_typo"),
        "{}",
        stderr(&out)
    );
    // Duplicate key: write_config already sets sample_sizes once.
    let config = write_config(dir.path(), &dataset, &vocab, "sample_sizes = 500\n");
    let out = streamtune(&["run", "--config", &config], dir.path());
    assert_eq!(exit_code(&out), 2);
    assert!(
        stderr(&out).contains("duplicate configuration key"),
        "{}",
        stderr(&out)
    );

    let config = write_config(dir.path(), &dataset, "/nonexistent/v.vocab", "");
    let out = streamtune(&["run", "--config", &config], dir.path());
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("vocabulary"), "{}", stderr(&out));
}

#[test]
fn run_reports_failed_runs_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, vocab) = synth_fixture(dir.path());
    // stream_length larger than the dataset: every run fails at the
    // stratified draw, but the command still writes an (empty) table.
    let config = dir.path().join("exp.conf");
    fs::write(
        &config,
        format!(
            "dataset = {dataset}\nvocabulary = {vocab}\noutput_dir = {}\n\
             stream_length = 5000\nbuffer_size = 300\nsample_sizes = 60\n\
             sampling_methods = none\nloss_kinds = BATL\nrepetitions = 1\n",
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    let out = streamtune(&["run", "--config", config.to_str().unwrap()], dir.path());
    assert_eq!(exit_code(&out), 1);
    assert!(
        stderr(&out).contains("none_rep0 failed"),
        "{}",
        stderr(&out)
    );
    let results = fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    assert!(
        results.ends_with("final_train_loss\n"),
        "no data rows expected:\n{results}"
    );
}

#[test]
fn run_accepts_frozen_embedding_files_for_the_baseline_only() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, vocab) = synth_fixture(dir.path());
    // Vectors keyed by item id: class c points along axis c, plus noise-free
    // structure the classifier picks up immediately.
    let items = fs::read_to_string(&dataset).unwrap();
    let mut lines = Vec::new();
    for line in items.lines() {
        let value: serde_json::Value = serde_json::from_str(line).unwrap();
        let id = value["id"].as_str().unwrap();
        let class = value["class"].as_u64().unwrap() as usize;
        let mut vector = [0.05; 4];
        vector[class] = 1.0;
        let joined: Vec<String> = vector.iter().map(f64::to_string).collect();
        lines.push(format!("{id}\t{}", joined.join(",")));
    }
    let embeddings = dir.path().join("vectors.tsv");
    fs::write(&embeddings, lines.join("\n") + "\n").unwrap();

    let config = write_config(
        dir.path(),
        &dataset,
        &vocab,
        &format!(
            "embedding_file = {}\nsampling_methods = none\n",
            embeddings.display()
        ),
    );
    // write_config fixes sampling_methods already — rewrite without the clash.
    let text = fs::read_to_string(&config).unwrap();
    let text = text.replace("sampling_methods = none,random\n", "");
    fs::write(&config, text).unwrap();

    let out = streamtune(&["run", "--config", &config], dir.path());
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let results = fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    // Perfectly separable vectors → near-perfect prequential score.
    let row = results
        .lines()
        .find(|l| l.starts_with("none_rep0"))
        .unwrap();
    let f1: f64 = row.split(',').nth(7).unwrap().parse().unwrap();
    assert!(f1 > 0.9, "{row}");

    // Any finetuning method alongside a frozen file is a config error.
    let text = fs::read_to_string(&config).unwrap();
    let text = text.replace("sampling_methods = none\n", "sampling_methods = random\n");
    fs::write(&config, text).unwrap();
    let out = streamtune(&["run", "--config", &config], dir.path());
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("embedding_file"), "{}", stderr(&out));
}
