//! Linear paths between weight vectors and the running-average merge.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::format_sig9;
use crate::nncore::{evaluate, mean_loss, Batch, Network, WeightVector};

/// φ(λ) = (1−λ)·θ_a + λ·θ_b. Endpoints, and coordinates where θ_a and θ_b
/// agree, are returned bit-for-bit.
pub fn interpolate(theta_a: &WeightVector, theta_b: &WeightVector, lambda: f64) -> Result<WeightVector> {
    theta_a.check_layout(theta_b)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::contract(format!("interpolation factor {lambda} outside [0, 1]")));
    }
    if lambda == 0.0 {
        return Ok(theta_a.clone());
    }
    if lambda == 1.0 {
        return Ok(theta_b.clone());
    }
    let keep = 1.0 - lambda;
    theta_a.zip_with(theta_b, |a, b| if a == b { a } else { keep * a + lambda * b })
}

/// θ_{1:t} = ((T−1)/T)·θ_{1:(t−1)} + (1/T)·θ_t, where `tasks_seen` (T) counts
/// every task the model has been trained on, the current one included.
pub fn merge_running(theta_prev: &WeightVector, theta_t: &WeightVector, tasks_seen: usize) -> Result<WeightVector> {
    if tasks_seen < 2 {
        return Err(Error::contract(format!(
            "running merge needs at least 2 tasks seen, got {tasks_seen}"
        )));
    }
    let t = tasks_seen as f64;
    interpolate(theta_t, theta_prev, (t - 1.0) / t)
}

/// `points` evenly spaced values from 0 to 1 inclusive.
pub fn uniform_grid(points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::config("scan grid needs at least 2 points"));
    }
    let last = (points - 1) as f64;
    Ok((0..points).map(|k| k as f64 / last).collect())
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.first() != Some(&0.0) || grid.last() != Some(&1.0) {
        return Err(Error::contract("scan grid must start at 0 and end at 1"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::contract("scan grid must be strictly increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub lambda: f64,
    pub acc_prev: f64,
    pub acc_cur: f64,
    pub acc_all: f64,
    pub loss_prev: f64,
    pub loss_cur: f64,
    pub loss_all: f64,
}

/// Accuracy and loss along φ(λ) for previous tasks (Ap), the current task (An) and both (All).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathScan {
    /// Task index of the current-task endpoint.
    pub task: usize,
    pub rows: Vec<ScanRow>,
}

impl PathScan {
    pub const CSV_HEADER: &'static str = "lambda,acc_prev,acc_cur,acc_all,loss_prev,loss_cur,loss_all";

    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            let cells = [
                r.lambda,
                r.acc_prev,
                r.acc_cur,
                r.acc_all,
                r.loss_prev,
                r.loss_cur,
                r.loss_all,
            ];
            let line: Vec<String> = cells.iter().map(|v| format_sig9(*v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// An interior grid point whose `acc_all` is at least both endpoints', if any.
    pub fn interior_at_least_endpoints(&self) -> Option<&ScanRow> {
        let (first, last) = (self.rows.first()?, self.rows.last()?);
        let floor = first.acc_all.max(last.acc_all);
        self.rows[1..self.rows.len() - 1].iter().find(|r| r.acc_all >= floor)
    }
}

/// Evaluates every grid point of the path from `theta_a` to `theta_b`.
///
/// `template` supplies the architecture; `previous` are the test sets of the
/// earlier tasks and `current` the test set of the task `theta_b` was trained on.
pub fn scan(
    template: &Network,
    theta_a: &WeightVector,
    theta_b: &WeightVector,
    grid: &[f64],
    previous: &[&Batch],
    current: &Batch,
    task: usize,
) -> Result<PathScan> {
    validate_grid(grid)?;
    theta_a.check_layout(theta_b)?;
    if previous.is_empty() || previous.iter().any(|b| b.is_empty()) || current.is_empty() {
        return Err(Error::contract("scan needs non-empty previous and current datasets"));
    }
    let prev = Batch::concat(previous)?;
    let all = Batch::concat(&[&prev, current])?;
    let rows = crate::parallel::map_ordered(grid, |&lambda| -> Result<ScanRow> {
        let net = template.with_weights(&interpolate(theta_a, theta_b, lambda)?)?;
        Ok(ScanRow {
            lambda,
            acc_prev: evaluate(&net, &prev)?,
            acc_cur: evaluate(&net, current)?,
            acc_all: evaluate(&net, &all)?,
            loss_prev: mean_loss(&net, &prev)?,
            loss_cur: mean_loss(&net, current)?,
            loss_all: mean_loss(&net, &all)?,
        })
    });
    Ok(PathScan {
        task,
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}
