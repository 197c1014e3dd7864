use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Labeled samples: an n × d input matrix with binary labels (1 = fake, 0 = real).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    inputs: Mat,
    labels: Vec<u8>,
}

impl Batch {
    pub fn new(inputs: Mat, labels: Vec<u8>) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return Err(Error::contract(format!(
                "batch has {} rows but {} labels",
                inputs.rows(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|l| **l > 1) {
            return Err(Error::contract(format!("label {bad} is not binary")));
        }
        Ok(Self { inputs, labels })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        if let Some(first) = rows.first() {
            if rows.iter().any(|r| r.len() != first.len()) {
                return Err(Error::contract("batch rows have differing dimensions"));
            }
        }
        Self::new(Mat::from_rows(rows), labels)
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            inputs: Mat::zeros(0, dim),
            labels: Vec::new(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    #[inline]
    pub fn inputs(&self) -> &Mat {
        &self.inputs
    }

    #[inline]
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn sample(&self, i: usize) -> &[f64] {
        self.inputs.row(i)
    }

    /// New batch made of the rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Batch {
        let d = self.dim();
        let mut data = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.inputs.row(i));
            labels.push(self.labels[i]);
        }
        Batch {
            inputs: Mat::from_vec(indices.len(), d, data).expect("consistent shape"),
            labels,
        }
    }

    /// Row-wise concatenation. All parts must share the input dimension.
    pub fn concat(parts: &[&Batch]) -> Result<Batch> {
        let Some(first) = parts.first() else {
            return Err(Error::contract("concat of zero batches"));
        };
        let d = first.dim();
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            if p.dim() != d {
                return Err(Error::contract(format!(
                    "cannot concatenate batches of dim {d} and {}",
                    p.dim()
                )));
            }
            data.extend_from_slice(p.inputs.as_slice());
            labels.extend_from_slice(&p.labels);
        }
        let n = labels.len();
        Ok(Batch {
            inputs: Mat::from_vec(n, d, data)?,
            labels,
        })
    }

    /// Same labels, inputs replaced row for row.
    pub fn with_inputs(&self, inputs: Mat) -> Result<Batch> {
        Batch::new(inputs, self.labels.clone())
    }
}
