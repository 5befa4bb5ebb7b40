//! Stream replay, prequential evaluation, and experiment orchestration.
//!
//! The harness owns everything around the algorithms: loading and
//! stratifying labelled text streams, generating the synthetic drift
//! stream, accumulating prequential metrics, driving a single run end to
//! end, fanning a configuration grid out over repetitions, and rendering
//! the CSV artifacts.

pub mod metrics;
pub mod report;
pub mod scenario;
pub mod stream;
pub mod synth;

pub use metrics::MetricsAccumulator;
pub use report::{render_results_csv, render_trajectory_csv, ResultRow, RESULTS_HEADER};
pub use scenario::{
    mean_std, run_experiment, run_scenario, run_scenario_with_classifier,
    run_scenario_with_file_embedder, RunConfig, RunOutcome, RunResult, SamplingMethod,
};
pub use stream::{load_jsonl, parse_jsonl, stratified_stream, to_jsonl, StreamItem};
pub use synth::{synth_drift_stream, SynthParams};
