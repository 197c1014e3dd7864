//! Task datasets and the CLDS / CSV dataset files.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::config::DriftParams;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::nncore::Batch;

/// One detection task: a train/test split plus the parameters that generated it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDataset {
    pub id: usize,
    pub train: Batch,
    pub test: Batch,
    pub meta: DriftParams,
}

impl TaskDataset {
    /// The leading `fraction` of the training set, at least one sample.
    pub fn trigger_slice(&self, fraction: f64) -> Batch {
        let n = ((self.train.len() as f64 * fraction).round() as usize).clamp(1, self.train.len().max(1));
        self.train.select(&(0..n).collect::<Vec<_>>())
    }
}

const CLDS_MAGIC: [u8; 4] = *b"CLDS";
const CLDS_VERSION: u32 = 1;

fn f32_exact(v: f64) -> Result<f32> {
    let f = v as f32;
    if f64::from(f) != v && !(v.is_nan() && f.is_nan()) {
        return Err(Error::contract(format!("feature {v} is not representable as f32")));
    }
    Ok(f)
}

/// Little-endian: magic, version u32, n u32, dim u32, then per sample a
/// label u8 and `dim` f32 features. Features must be exactly representable as f32.
pub fn write_clds<W: Write>(w: &mut W, data: &Batch) -> Result<()> {
    let n = u32::try_from(data.len()).map_err(|_| Error::contract("too many samples for CLDS"))?;
    let dim = u32::try_from(data.dim()).map_err(|_| Error::contract("dimension too large for CLDS"))?;
    let mut buf = Vec::with_capacity(16 + data.len() * (1 + 4 * data.dim()));
    buf.extend_from_slice(&CLDS_MAGIC);
    buf.extend_from_slice(&CLDS_VERSION.to_le_bytes());
    buf.extend_from_slice(&n.to_le_bytes());
    buf.extend_from_slice(&dim.to_le_bytes());
    for i in 0..data.len() {
        buf.push(data.labels()[i]);
        for v in data.sample(i) {
            buf.extend_from_slice(&f32_exact(*v)?.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_clds<R: Read>(r: &mut R) -> Result<Batch> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || bytes[..4] != CLDS_MAGIC {
        return Err(Error::Format("not a CLDS dataset".into()));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != CLDS_VERSION {
        return Err(Error::Format(format!("unsupported CLDS version {version}")));
    }
    let (n, dim) = (word(8) as usize, word(12) as usize);
    let record = 1 + 4 * dim;
    if bytes.len() != 16 + n * record {
        return Err(Error::Format(format!(
            "CLDS body holds {} bytes, header promises {}",
            bytes.len() - 16,
            n * record
        )));
    }
    let mut labels = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * dim);
    for rec in bytes[16..].chunks_exact(record) {
        labels.push(rec[0]);
        values.extend(
            rec[1..]
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes")))),
        );
    }
    Batch::new(Mat::from_vec(n, dim, values)?, labels).map_err(|e| Error::Format(e.to_string()))
}

/// CSV with header `label,f0,...,f{dim-1}`; features printed as shortest f32.
pub fn write_dataset_csv<W: Write>(w: &mut W, data: &Batch) -> Result<()> {
    let header: Vec<String> = std::iter::once("label".to_string())
        .chain((0..data.dim()).map(|k| format!("f{k}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for i in 0..data.len() {
        let mut line = data.labels()[i].to_string();
        for v in data.sample(i) {
            line.push(',');
            line.push_str(&f32_exact(*v)?.to_string());
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_dataset_csv<R: BufRead>(r: R) -> Result<Batch> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty dataset CSV".into()))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    let dim = cols.len().saturating_sub(1);
    let expected: Vec<String> = (0..dim).map(|k| format!("f{k}")).collect();
    if cols.first() != Some(&"label") || !cols[1..].iter().copied().eq(expected.iter().map(String::as_str)) {
        return Err(Error::Format("dataset CSV header must be label,f0,...".into()));
    }
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.trim().split(',').collect();
        if cells.len() != dim + 1 {
            return Err(Error::Format(format!(
                "dataset CSV line {} has {} cells",
                k + 2,
                cells.len()
            )));
        }
        labels.push(
            cells[0]
                .parse::<u8>()
                .map_err(|_| Error::Format(format!("bad label on line {}", k + 2)))?,
        );
        for c in &cells[1..] {
            let v: f32 = c
                .parse()
                .map_err(|_| Error::Format(format!("bad feature {c} on line {}", k + 2)))?;
            values.push(f64::from(v));
        }
    }
    let n = labels.len();
    Batch::new(Mat::from_vec(n, dim, values)?, labels).map_err(|e| Error::Format(e.to_string()))
}
