//! The test-accuracy matrix B and the AA/AF summaries.

use serde::{Deserialize, Serialize};

use super::format::format_sig9;
use crate::error::{Error, Result};

/// Lower-triangular matrix of accuracies; `B[i][j]` is the accuracy on task
/// j's test set after training on task i (0-based here).
///
/// Rows are filled in order: a cell in row i may be written only once every
/// cell of rows 0..i is set, and never above the diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    cells: Vec<Vec<Option<f64>>>,
}

impl AccuracyMatrix {
    pub fn new(tasks: usize) -> Self {
        Self {
            cells: (0..tasks).map(|i| vec![None; i + 1]).collect(),
        }
    }

    /// Builds a matrix from full rows, row i holding i + 1 values.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let mut m = Self::new(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(Error::contract(format!(
                    "row {i} has {} cells, expected {}",
                    row.len(),
                    i + 1
                )));
            }
            for (j, v) in row.iter().enumerate() {
                m.record(i, j, *v)?;
            }
        }
        Ok(m)
    }

    pub fn tasks(&self) -> usize {
        self.cells.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.cells.get(i).and_then(|r| r.get(j)).copied().flatten()
    }

    pub fn row_complete(&self, i: usize) -> bool {
        self.cells.get(i).is_some_and(|r| r.iter().all(Option::is_some))
    }

    /// Number of leading complete rows.
    pub fn complete_rows(&self) -> usize {
        (0..self.tasks()).take_while(|i| self.row_complete(*i)).count()
    }

    pub fn record(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        if i >= self.tasks() {
            return Err(Error::contract(format!(
                "row {i} outside a {}-task matrix",
                self.tasks()
            )));
        }
        if j > i {
            return Err(Error::contract(format!("cell ({i}, {j}) lies above the diagonal")));
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::contract(format!("accuracy {value} outside [0, 1]")));
        }
        if i > 0 && !self.row_complete(i - 1) {
            return Err(Error::contract(format!(
                "row {i} started before row {} is complete",
                i - 1
            )));
        }
        if self.cells[i][j].is_some() {
            return Err(Error::contract(format!("cell ({i}, {j}) already recorded")));
        }
        self.cells[i][j] = Some(value);
        Ok(())
    }

    fn full_row(&self, i: usize) -> Result<Vec<f64>> {
        if !self.row_complete(i) {
            return Err(Error::contract(format!("row {i} is incomplete")));
        }
        Ok(self.cells[i].iter().map(|c| c.expect("complete row")).collect())
    }

    /// Writes the matrix as CSV: one line per row, `NA` for unset cells.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        let t = self.tasks();
        for i in 0..t {
            let line: Vec<String> = (0..t)
                .map(|j| self.get(i, j).map(format_sig9).unwrap_or_else(|| "NA".into()))
                .collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    pub fn read_csv(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let t = lines.len();
        let mut m = Self::new(t);
        for (i, line) in lines.iter().enumerate() {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != t {
                return Err(Error::Format(format!(
                    "matrix row {} has {} cells, expected {t}",
                    i + 1,
                    cells.len()
                )));
            }
            for (j, cell) in cells.iter().enumerate() {
                if *cell == "NA" {
                    continue;
                }
                let v: f64 = cell.parse().map_err(|_| {
                    Error::Format(format!("matrix cell ({}, {}) is not a number: {cell}", i + 1, j + 1))
                })?;
                m.record(i, j, v).map_err(|e| Error::Format(e.to_string()))?;
            }
        }
        Ok(m)
    }
}

/// AA after `t` tasks: mean of row t (1-based `t`).
pub fn average_accuracy(b: &AccuracyMatrix, t: usize) -> Result<f64> {
    if t == 0 {
        return Err(Error::contract("average_accuracy needs t ≥ 1"));
    }
    let row = b.full_row(t - 1)?;
    Ok(row.iter().sum::<f64>() / t as f64)
}

/// AF after `t` tasks: mean of `B[t][j] − B[j][j]` over the earlier tasks.
/// Negative values mean forgetting.
pub fn average_forgetting(b: &AccuracyMatrix, t: usize) -> Result<f64> {
    if t < 2 {
        return Err(Error::contract(format!("average_forgetting needs t ≥ 2, got {t}")));
    }
    let row = b.full_row(t - 1)?;
    let mut sum = 0.0;
    for (j, v) in row.iter().enumerate().take(t - 1) {
        let diag = b
            .get(j, j)
            .ok_or_else(|| Error::contract(format!("diagonal cell {j} unset")))?;
        sum += v - diag;
    }
    Ok(sum / (t - 1) as f64)
}
