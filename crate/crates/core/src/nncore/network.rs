//! Dense feed-forward network with a single-logit binary head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::batch::Batch;
use super::layer::{lora_merge, Activation, DenseLayer};
use super::weights::{LayerShape, Layout, WeightVector};
use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<DenseLayer>,
}

/// Activations recorded by [`Network::forward`].
///
/// `inputs[m]` is a_{m-1} (the input to layer m), `pre[m]` is h_m.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub inputs: Vec<Mat>,
    pub pre: Vec<Mat>,
    pub logits: Vec<f64>,
}

impl Network {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        for (m, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::config(format!(
                    "layer {m} outputs {} values but layer {} expects {}",
                    pair[0].out_dim(),
                    m + 1,
                    pair[1].in_dim()
                )));
            }
        }
        for (m, layer) in layers.iter().enumerate() {
            if let Some(b) = &layer.bias {
                if b.len() != layer.out_dim() {
                    return Err(Error::config(format!("layer {m} bias length mismatch")));
                }
            }
            if let Some(a) = &layer.adapter {
                if a.a.cols() != layer.in_dim() || a.b.rows() != layer.out_dim() || a.b.cols() != a.a.rows() {
                    return Err(Error::config(format!("layer {m} adapter shape mismatch")));
                }
            }
        }
        if layers.last().map(DenseLayer::out_dim) != Some(1) {
            return Err(Error::config("final layer must have exactly one output (binary logit)"));
        }
        Ok(Self { layers })
    }

    /// Randomly initialized `input → hidden… → 1` network. Hidden layers use
    /// `activation`, the head is the identity so it emits a raw logit.
    pub fn random<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        activation: Activation,
        bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (m, w) in dims.windows(2).enumerate() {
            let act = if m + 2 == dims.len() {
                Activation::Identity
            } else {
                activation
            };
            layers.push(DenseLayer::random(w[0], w[1], act, bias, rng)?);
        }
        Self::from_layers(layers)
    }

    #[inline]
    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    #[inline]
    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn layout(&self) -> Layout {
        let shapes: Vec<LayerShape> = self
            .layers
            .iter()
            .map(|l| LayerShape {
                in_dim: l.in_dim(),
                out_dim: l.out_dim(),
                bias: l.bias.is_some(),
                lora_rank: l.adapter.as_ref().map_or(0, |a| a.rank()),
            })
            .collect();
        Layout::new(&shapes)
    }

    pub fn flatten(&self) -> WeightVector {
        let layout = self.layout();
        let mut values = Vec::with_capacity(layout.len());
        for layer in &self.layers {
            values.extend_from_slice(layer.weight.as_slice());
            if let Some(b) = &layer.bias {
                values.extend_from_slice(b);
            }
            if let Some(a) = &layer.adapter {
                values.extend_from_slice(a.a.as_slice());
                values.extend_from_slice(a.b.as_slice());
            }
        }
        WeightVector::new(layout, values).expect("layout built from the same layers")
    }

    /// Overwrites every parameter from `weights`, which must match this network's layout.
    pub fn load(&mut self, weights: &WeightVector) -> Result<()> {
        if *weights.layout() != self.layout() {
            return Err(Error::contract("weight vector layout does not match network"));
        }
        let v = weights.values();
        for (layer, slots) in self.layers.iter_mut().zip(weights.layout().layers()) {
            layer.weight.as_mut_slice().copy_from_slice(&v[slots.weight.clone()]);
            if let (Some(b), Some(r)) = (&mut layer.bias, &slots.bias) {
                b.copy_from_slice(&v[r.clone()]);
            }
            if let (Some(ad), Some(ra), Some(rb)) = (&mut layer.adapter, &slots.lora_a, &slots.lora_b) {
                ad.a.as_mut_slice().copy_from_slice(&v[ra.clone()]);
                ad.b.as_mut_slice().copy_from_slice(&v[rb.clone()]);
            }
        }
        Ok(())
    }

    /// Copy of this network carrying `weights`.
    pub fn with_weights(&self, weights: &WeightVector) -> Result<Network> {
        let mut net = self.clone();
        net.load(weights)?;
        Ok(net)
    }

    /// Attaches adapters of `rank` to every layer where `mask` is true.
    pub fn attach_lora<R: Rng + ?Sized>(&mut self, mask: &[bool], rank: usize, rng: &mut R) -> Result<()> {
        if mask.len() != self.layers.len() {
            return Err(Error::config(format!(
                "LoRA mask has {} entries but the network has {} layers",
                mask.len(),
                self.layers.len()
            )));
        }
        for (m, (layer, on)) in self.layers.iter_mut().zip(mask).enumerate() {
            if *on {
                layer
                    .attach_lora(rank, rng)
                    .map_err(|e| Error::config(format!("layer {m}: {e}")))?;
            }
        }
        Ok(())
    }

    /// Folds every attached adapter into its base weight.
    pub fn merge_adapters(&self) -> Result<Network> {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                if l.adapter.is_some() {
                    lora_merge(l)
                } else {
                    Ok(l.clone())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Network::from_layers(layers)
    }

    pub fn forward(&self, batch: &Batch) -> Result<ForwardTrace> {
        self.forward_inputs(batch.inputs())
    }

    pub fn forward_inputs(&self, x: &Mat) -> Result<ForwardTrace> {
        if x.cols() != self.input_dim() {
            return Err(Error::config(format!(
                "input dimension {} does not match network input {}",
                x.cols(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for (m, layer) in self.layers.iter().enumerate() {
            let w = layer.effective_weight();
            let mut h = a.matmul_transposed(&w);
            if let Some(b) = &layer.bias {
                for i in 0..h.rows() {
                    for (v, bj) in h.row_mut(i).iter_mut().zip(b) {
                        *v += bj;
                    }
                }
            }
            if !h.all_finite() {
                return Err(Error::Numeric {
                    layer: m,
                    detail: "non-finite pre-activation".into(),
                });
            }
            let mut next = h.clone();
            next.as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = layer.activation.apply(*v));
            inputs.push(std::mem::replace(&mut a, next));
            pre.push(h);
        }
        let logits = a.as_slice().to_vec();
        Ok(ForwardTrace { inputs, pre, logits })
    }

    pub fn logits(&self, batch: &Batch) -> Result<Vec<f64>> {
        Ok(self.forward(batch)?.logits)
    }
}
