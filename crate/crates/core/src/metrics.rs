//! Accuracy-matrix bookkeeping, AA/AF and report emission.

mod format;
mod matrix;
mod report;

pub use format::{format_sig, format_sig9};
pub use matrix::{average_accuracy, average_forgetting, AccuracyMatrix};
pub use report::{emit_report, read_report, RunEvent, RunReport, RunStatus, TaskSummary, Timing};
