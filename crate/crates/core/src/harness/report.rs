//! CSV rendering for experiment results and per-run trajectories.
//!
//! Every emitted file starts with the fully resolved configuration echoed
//! as `# key = value` comment lines, so a results file is self-describing:
//! re-running with the echoed values reproduces it. Floats are printed with
//! six decimals; cells that do not apply to a row (loss columns of the
//! baseline) are left empty rather than zero-filled, so parsers cannot
//! mistake "not applicable" for a measurement.

use crate::finetune::LossKind;
use crate::harness::scenario::{RunOutcome, SamplingMethod};

pub const RESULTS_HEADER: &str = "run_id,dataset,method,loss,sample_size,repetition,seed,\
                                  macro_f1,elapsed_seconds,finetune_seconds,final_train_loss";

/// One successful repetition, flattened for the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub run_id: String,
    pub dataset: String,
    pub method: SamplingMethod,
    pub loss: Option<LossKind>,
    pub sample_size: Option<usize>,
    pub repetition: usize,
    pub seed: u64,
    pub macro_f1: f64,
    pub elapsed_seconds: f64,
    pub finetune_seconds: Option<f64>,
    pub final_train_loss: Option<f64>,
}

impl ResultRow {
    /// Flattens a successful outcome; `None` for failed runs, which are
    /// reported on stderr instead of in the table.
    pub fn from_outcome(outcome: &RunOutcome, dataset: &str) -> Option<ResultRow> {
        let result = outcome.result.as_ref().ok()?;
        let baseline = outcome.config.method.is_baseline();
        Some(ResultRow {
            run_id: outcome.config.run_id(outcome.repetition),
            dataset: dataset.to_string(),
            method: outcome.config.method,
            loss: (!baseline).then_some(outcome.config.loss),
            sample_size: (!baseline).then_some(outcome.config.sample_size),
            repetition: outcome.repetition,
            seed: outcome.seed,
            macro_f1: result.final_macro_f1,
            elapsed_seconds: result.elapsed_seconds,
            finetune_seconds: result.train_report.as_ref().map(|r| r.wall_time_seconds),
            final_train_loss: result.train_report.as_ref().map(|r| r.final_loss),
        })
    }
}

/// Quotes a field only when CSV requires it.
fn csv_field(value: &str) -> String {
    if value.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

fn float_cell(value: f64) -> String {
    format!("{value:.6}")
}

fn echo_preamble(echo: &[(String, String)], out: &mut String) {
    for (key, value) in echo {
        out.push_str("# ");
        out.push_str(key);
        out.push_str(" = ");
        out.push_str(value);
        out.push('\n');
    }
}

/// Renders the results table. With `zero_timing`, wall-clock columns are
/// written as zero so two runs of the same configuration produce
/// byte-identical files.
pub fn render_results_csv(
    echo: &[(String, String)],
    rows: &[ResultRow],
    zero_timing: bool,
) -> String {
    let mut out = String::new();
    echo_preamble(echo, &mut out);
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for row in rows {
        let elapsed = if zero_timing {
            0.0
        } else {
            row.elapsed_seconds
        };
        let finetune = row
            .finetune_seconds
            .map(|s| float_cell(if zero_timing { 0.0 } else { s }))
            .unwrap_or_default();
        let cells = [
            csv_field(&row.run_id),
            csv_field(&row.dataset),
            row.method.to_string(),
            row.loss.map(|l| l.to_string()).unwrap_or_default(),
            row.sample_size.map(|n| n.to_string()).unwrap_or_default(),
            row.repetition.to_string(),
            row.seed.to_string(),
            float_cell(row.macro_f1),
            float_cell(elapsed),
            finetune,
            row.final_train_loss.map(float_cell).unwrap_or_default(),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Renders one run's cumulative macro-F1 checkpoints.
pub fn render_trajectory_csv(echo: &[(String, String)], trajectory: &[(usize, f64)]) -> String {
    let mut out = String::new();
    echo_preamble(echo, &mut out);
    out.push_str("item_index,cumulative_macro_f1\n");
    for &(index, f1) in trajectory {
        out.push_str(&format!("{index},{}\n", float_cell(f1)));
    }
    out
}
