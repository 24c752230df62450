//! Perception uncertainty from verification-labelled test data.
//!
//! Each test input contributes its true class, the classifier's prediction and
//! the verdicts of `n` online verifiers. Inputs are partitioned by verdict
//! vector into `2^n` confusion matrices, from which the conditional
//! probabilities `p[k][k'][v]` of predicting `k'` with verdicts `v` given true
//! class `k` follow as exact count ratios.

mod io;
mod report;
mod tensor;

pub use io::{read_samples_csv, write_samples_csv};
pub use report::{AccuracyReport, ClassAccuracy, OutcomeAccuracy};
pub use tensor::{
    ingest, verdict_bits, verdict_index, verdicts_from_index, ConfusionCounts, ConfusionTensor, Ratio, VerifiedSample,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum UncertaintyError {
    #[error("class {class} has no samples, so its perception probabilities are undefined")]
    EmptyClass { class: u32 },
    #[error("row {row}: expected {expected} verdicts, found {found}")]
    ArityMismatch { row: usize, expected: usize, found: usize },
    #[error("row {row}: label {label} is outside 1..={classes}")]
    LabelOutOfRange { row: usize, label: u32, classes: usize },
    #[error("malformed tensor: {0}")]
    Shape(String),
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
