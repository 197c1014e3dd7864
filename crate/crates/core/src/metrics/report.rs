//! Run reports and their on-disk form.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::matrix::{average_accuracy, average_forgetting, AccuracyMatrix};
use crate::config::ExperimentConfig;
use crate::connectivity::{ForgettingRecord, PathScan};
use crate::continual::StepRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed { error: String },
}

/// AA and AF after task `task` (1-based); AF is absent for the first task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task: usize,
    pub aa: f64,
    pub af: Option<f64>,
}

/// What happened when a task arrived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEvent {
    pub task: usize,
    /// Accuracy of the incoming model on the trigger slice; absent for the offline task.
    pub pre_accuracy: Option<f64>,
    pub trained: bool,
    pub merged: bool,
    /// Tasks trained on so far, the current one included.
    pub tasks_seen: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub per_task_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub strategy: String,
    pub status: RunStatus,
    pub tasks: Vec<TaskSummary>,
    pub matrix: AccuracyMatrix,
    pub events: Vec<RunEvent>,
    pub scans: Vec<PathScan>,
    pub forgetting: Vec<ForgettingRecord>,
    pub timing: Timing,
    /// Written to `steps.jsonl`, not embedded in `report.json`.
    #[serde(skip)]
    pub steps: Vec<StepRecord>,
}

impl RunReport {
    /// Recomputes AA/AF from the embedded matrix and checks they match bit-for-bit.
    pub fn verify(&self) -> Result<()> {
        for s in &self.tasks {
            let aa = average_accuracy(&self.matrix, s.task)?;
            let af = if s.task >= 2 {
                Some(average_forgetting(&self.matrix, s.task)?)
            } else {
                None
            };
            if aa.to_bits() != s.aa.to_bits() || af.map(f64::to_bits) != s.af.map(f64::to_bits) {
                return Err(Error::contract(format!(
                    "task {} summary disagrees with the matrix",
                    s.task
                )));
            }
        }
        Ok(())
    }

    /// Fills `tasks` from every complete matrix row.
    pub fn summarize(matrix: &AccuracyMatrix) -> Result<Vec<TaskSummary>> {
        (1..=matrix.complete_rows())
            .map(|t| {
                Ok(TaskSummary {
                    task: t,
                    aa: average_accuracy(matrix, t)?,
                    af: if t >= 2 {
                        Some(average_forgetting(matrix, t)?)
                    } else {
                        None
                    },
                })
            })
            .collect()
    }

    pub fn final_summary(&self) -> Option<&TaskSummary> {
        self.tasks.last()
    }
}

/// Writes `report.json`, `matrix.csv`, `steps.jsonl` and one `scan_t{k}.csv`
/// per scan into `dir`, creating it if needed.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<()> {
    report.verify()?;
    fs::create_dir_all(dir)?;

    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(dir.join("report.json"), json)?;
    fs::write(dir.join("matrix.csv"), report.matrix.to_csv_string())?;

    for scan in &report.scans {
        let mut w = BufWriter::new(fs::File::create(dir.join(format!("scan_t{}.csv", scan.task)))?);
        scan.write_csv(&mut w)?;
        w.flush()?;
    }

    let mut w = BufWriter::new(fs::File::create(dir.join("steps.jsonl"))?);
    for step in &report.steps {
        serde_json::to_writer(&mut w, step)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
