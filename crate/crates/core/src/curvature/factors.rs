//! Per-layer Kronecker factors estimated at an anchor point.

use serde::{Deserialize, Serialize};

use crate::container::{read_container, write_container, Section};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::nncore::{backward_from_logits, sigmoid, Batch, Network, WeightVector};

/// Curvature of one layer as `Q ⊗ H`, both already damped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFactors {
    /// in × in, mean of a_{m−1}·a_{m−1}ᵀ plus damping·I.
    pub q: Mat,
    /// out × out, mean Gauss–Newton curvature wrt h_m plus damping·I.
    pub h: Mat,
    pub damping: f64,
}

impl LayerFactors {
    pub fn undamped_q(&self) -> Mat {
        let mut q = self.q.clone();
        q.add_diagonal(-self.damping);
        q
    }

    pub fn undamped_h(&self) -> Mat {
        let mut h = self.h.clone();
        h.add_diagonal(-self.damping);
        h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSnapshot {
    /// Weights at which the factors were estimated (W^pre).
    pub anchor: WeightVector,
    pub factors: Vec<LayerFactors>,
    pub fisher_diag: Option<Vec<f64>>,
    pub sample_count: usize,
}

impl CurvatureSnapshot {
    /// Assembles a snapshot from explicit factors, checking dimensions against the anchor.
    pub fn new(anchor: WeightVector, factors: Vec<LayerFactors>, sample_count: usize) -> Result<Self> {
        let layers = anchor.layout().layers();
        if factors.len() != layers.len() {
            return Err(Error::contract(format!(
                "{} factor pairs for {} layers",
                factors.len(),
                layers.len()
            )));
        }
        for (m, (f, s)) in factors.iter().zip(layers).enumerate() {
            if f.q.shape() != (s.in_dim, s.in_dim) || f.h.shape() != (s.out_dim, s.out_dim) {
                return Err(Error::contract(format!(
                    "layer {m} factor dims do not match the anchor layout"
                )));
            }
        }
        if sample_count == 0 {
            return Err(Error::contract("snapshot needs at least one sample"));
        }
        Ok(Self {
            anchor,
            factors,
            fisher_diag: None,
            sample_count,
        })
    }
}

/// Estimates `Q_m` and `H_m` for every layer on `data` at the network's current weights.
///
/// `H_m` is the Gauss–Newton curvature: per sample, the logit curvature
/// σ(z)(1−σ(z)) is carried back to h_m through the Jacobian g = ∂z/∂h_m,
/// giving σ(z)(1−σ(z))·g·gᵀ, which is then averaged.
pub fn collect_factors(net: &Network, data: &Batch, damping: f64) -> Result<CurvatureSnapshot> {
    if data.is_empty() {
        return Err(Error::contract("collect_factors on an empty dataset"));
    }
    if !(damping > 0.0) || !damping.is_finite() {
        return Err(Error::contract(format!("damping must be positive, got {damping}")));
    }
    let n = data.len();
    let inv_n = 1.0 / n as f64;
    let trace = net.forward(data)?;
    let ones = vec![1.0; n];
    let (_, jacobians) = backward_from_logits(net, &trace, &ones)?;
    let curv: Vec<f64> = trace
        .logits
        .iter()
        .map(|z| {
            let s = sigmoid(*z);
            s * (1.0 - s)
        })
        .collect();

    let mut factors = Vec::with_capacity(net.layers().len());
    for (m, layer) in net.layers().iter().enumerate() {
        let a_prev = &trace.inputs[m];
        let mut q = a_prev.transposed_matmul(a_prev).scale(inv_n);
        let g = &jacobians[m];
        let mut h = Mat::zeros(layer.out_dim(), layer.out_dim());
        for (i, c) in curv.iter().enumerate() {
            let gi = g.row(i);
            h.add_outer(gi, gi, c * inv_n);
        }
        // kill rounding asymmetry before damping
        q = q.symmetrized();
        h = h.symmetrized();
        q.add_diagonal(damping);
        h.add_diagonal(damping);
        factors.push(LayerFactors { q, h, damping });
    }
    CurvatureSnapshot::new(net.flatten(), factors, n)
}

const TAG_Q: [u8; 4] = *b"QFAC";
const TAG_H: [u8; 4] = *b"HFAC";
const TAG_FISHER: [u8; 4] = *b"FDIA";
const TAG_META: [u8; 4] = *b"META";

/// Writes the snapshot in the LMCW container. `template` supplies the
/// activations; its layout must match the anchor.
pub fn write_snapshot<W: std::io::Write>(w: &mut W, template: &Network, snapshot: &CurvatureSnapshot) -> Result<()> {
    let net = template.with_weights(&snapshot.anchor)?;
    let mut sections = Vec::new();
    for f in &snapshot.factors {
        sections.push(Section {
            tag: TAG_Q,
            data: f.q.clone(),
        });
    }
    for f in &snapshot.factors {
        sections.push(Section {
            tag: TAG_H,
            data: f.h.clone(),
        });
    }
    if let Some(fd) = &snapshot.fisher_diag {
        sections.push(Section {
            tag: TAG_FISHER,
            data: Mat::from_vec(1, fd.len(), fd.clone())?,
        });
    }
    let mut meta = vec![snapshot.sample_count as f64];
    meta.extend(snapshot.factors.iter().map(|f| f.damping));
    sections.push(Section {
        tag: TAG_META,
        data: Mat::from_vec(1, meta.len(), meta)?,
    });
    write_container(w, &net, &sections)
}

pub fn read_snapshot<R: std::io::Read>(r: &mut R) -> Result<(Network, CurvatureSnapshot)> {
    let c = read_container(r)?;
    let take = |tag: [u8; 4]| c.sections.iter().filter(move |s| s.tag == tag).map(|s| s.data.clone());
    let qs: Vec<Mat> = take(TAG_Q).collect();
    let hs: Vec<Mat> = take(TAG_H).collect();
    let meta = take(TAG_META)
        .next()
        .ok_or_else(|| Error::Format("snapshot is missing its META section".into()))?;
    let meta = meta.as_slice();
    if qs.len() != hs.len() || meta.len() != qs.len() + 1 {
        return Err(Error::Format("snapshot sections are inconsistent".into()));
    }
    let factors = qs
        .into_iter()
        .zip(hs)
        .zip(&meta[1..])
        .map(|((q, h), d)| LayerFactors { q, h, damping: *d })
        .collect();
    let sample_count = meta[0] as usize;
    let mut snap =
        CurvatureSnapshot::new(c.network.flatten(), factors, sample_count).map_err(|e| Error::Format(e.to_string()))?;
    snap.fisher_diag = take(TAG_FISHER).next().map(Mat::into_vec);
    Ok((c.network, snap))
}
