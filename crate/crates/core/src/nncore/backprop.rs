//! Binary cross-entropy, exact reverse-mode gradients and evaluation.

use super::batch::Batch;
use super::layer::sigmoid;
use super::network::{ForwardTrace, Network};
use super::weights::WeightVector;
use crate::error::{Error, Result};
use crate::linalg::Mat;

/// `−[y·ln σ(z) + (1−y)·ln(1−σ(z))]` in the overflow-free form
/// `max(z, 0) − z·y + ln(1 + e^{−|z|})`.
#[inline]
pub fn loss_bce(logit: f64, label: u8) -> f64 {
    let y = f64::from(label);
    logit.max(0.0) - logit * y + (-logit.abs()).exp().ln_1p()
}

/// d loss_bce / d logit.
#[inline]
pub fn loss_bce_grad(logit: f64, label: u8) -> f64 {
    sigmoid(logit) - f64::from(label)
}

pub fn mean_bce(logits: &[f64], labels: &[u8]) -> f64 {
    let n = logits.len() as f64;
    logits.iter().zip(labels).map(|(z, y)| loss_bce(*z, *y)).sum::<f64>() / n
}

/// Output of a backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    /// Same layout as the network; frozen coordinates are exactly zero.
    pub grads: WeightVector,
    /// ∂L/∂h_m per layer (n × out_m).
    pub pre_grads: Vec<Mat>,
    pub loss: f64,
}

/// Mean BCE over the batch and its exact gradient.
pub fn backward(net: &Network, batch: &Batch) -> Result<Gradients> {
    if batch.is_empty() {
        return Err(Error::contract("backward on an empty batch"));
    }
    let trace = net.forward(batch)?;
    let n = batch.len() as f64;
    let dlogits: Vec<f64> = trace
        .logits
        .iter()
        .zip(batch.labels())
        .map(|(z, y)| loss_bce_grad(*z, *y) / n)
        .collect();
    let loss = mean_bce(&trace.logits, batch.labels());
    let (grads, pre_grads) = backward_from_logits(net, &trace, &dlogits)?;
    Ok(Gradients { grads, pre_grads, loss })
}

/// Backpropagates arbitrary per-sample logit gradients `dlogits` through a
/// recorded trace. Returns parameter gradients and ∂L/∂h_m for every layer.
pub fn backward_from_logits(net: &Network, trace: &ForwardTrace, dlogits: &[f64]) -> Result<(WeightVector, Vec<Mat>)> {
    let layers = net.layers();
    let n = trace.logits.len();
    if dlogits.len() != n {
        return Err(Error::contract(format!(
            "{} logit gradients for {} samples",
            dlogits.len(),
            n
        )));
    }
    let layout = net.layout();
    let mut grads = WeightVector::zeros(layout.clone());
    let mut pre_grads = vec![Mat::zeros(0, 0); layers.len()];

    // dL/da_M for the head; a_M is the logit column.
    let mut upstream = Mat::from_vec(n, 1, dlogits.to_vec())?;
    for m in (0..layers.len()).rev() {
        let layer = &layers[m];
        let h = &trace.pre[m];
        let mut delta = upstream;
        for (d, hv) in delta.as_mut_slice().iter_mut().zip(h.as_slice()) {
            *d *= layer.activation.derivative(*hv);
        }
        if !delta.all_finite() {
            return Err(Error::Numeric {
                layer: m,
                detail: "non-finite gradient wrt pre-activation".into(),
            });
        }
        let a_prev = &trace.inputs[m];
        // dL/dW_eff, out × in
        let g = delta.transposed_matmul(a_prev);
        if !g.all_finite() {
            return Err(Error::Numeric {
                layer: m,
                detail: "non-finite weight gradient".into(),
            });
        }
        let slots = &layout.layers()[m];
        let out = grads.values_mut();
        match &layer.adapter {
            Some(adapter) => {
                // base W and bias frozen
                let s = adapter.scale;
                let ga = adapter.b.transposed_matmul(&g).scale(s);
                let gb = g.matmul_transposed(&adapter.a).scale(s);
                out[slots.lora_a.clone().expect("adapter slot")].copy_from_slice(ga.as_slice());
                out[slots.lora_b.clone().expect("adapter slot")].copy_from_slice(gb.as_slice());
            }
            None => {
                out[slots.weight.clone()].copy_from_slice(g.as_slice());
                if let Some(r) = &slots.bias {
                    let gbias = &mut out[r.clone()];
                    for i in 0..delta.rows() {
                        for (gb, d) in gbias.iter_mut().zip(delta.row(i)) {
                            *gb += d;
                        }
                    }
                }
            }
        }
        upstream = if m > 0 {
            delta.matmul(&layer.effective_weight())
        } else {
            Mat::zeros(0, 0)
        };
        pre_grads[m] = delta;
    }
    Ok((grads, pre_grads))
}

/// Mean BCE of the network on `batch`.
pub fn mean_loss(net: &Network, batch: &Batch) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::contract("loss on an empty dataset"));
    }
    let logits = net.logits(batch)?;
    Ok(mean_bce(&logits, batch.labels()))
}

/// Predicted class: 1 iff σ(z) > 0.5, ties go to 0.
#[inline]
pub fn predict(logit: f64) -> u8 {
    u8::from(sigmoid(logit) > 0.5)
}

/// Fraction of correctly classified samples.
pub fn evaluate(net: &Network, batch: &Batch) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::contract("evaluate on an empty dataset"));
    }
    let logits = net.logits(batch)?;
    Ok(accuracy_of(&logits, batch.labels()))
}

pub fn accuracy_of(logits: &[f64], labels: &[u8]) -> f64 {
    let correct = logits.iter().zip(labels).filter(|(z, y)| predict(**z) == **y).count();
    correct as f64 / labels.len() as f64
}
