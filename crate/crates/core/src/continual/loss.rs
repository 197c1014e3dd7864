//! Chain loss, curvature penalty and the EWC baseline penalty.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::augment::{augment_batch, AugmentationSpec, Representation};
use super::strategy::StrategyConfig;
use crate::curvature::{kfac_penalty_grad_with, kfac_quadratic_with, CurvatureSnapshot};
use crate::error::{Error, Result};
use crate::nncore::{backward, Batch, Network, WeightVector};

/// Loss components of one step, each already multiplied by its weight.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    /// BCE on the clean batch.
    pub cls: f64,
    /// λ · Σ BCE on the three augmented batches.
    pub ac_extra: f64,
    /// γ · K-FAC penalty.
    pub kfac: f64,
    pub ewc: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.cls + self.ac_extra + self.kfac + self.ewc
    }
}

/// Chain loss with its per-term batch means and gradient.
#[derive(Debug, Clone)]
pub struct AcLoss {
    pub clean: f64,
    pub augmented: [f64; 3],
    pub lambda: f64,
    pub grads: WeightVector,
}

impl AcLoss {
    pub fn value(&self) -> f64 {
        self.clean + self.lambda * (self.augmented[0] + self.augmented[1] + self.augmented[2])
    }
}

/// `L_cls(x) + λ Σᵢ L_cls(xᵢ)` over the chain stages, with gradient.
///
/// With λ = 0 the chain is not drawn and the result is the clean BCE.
pub fn loss_ac_with_grad<R: Rng + ?Sized>(
    net: &Network,
    batch: &Batch,
    spec: &AugmentationSpec,
    repr: Representation,
    lambda: f64,
    rng: &mut R,
) -> Result<AcLoss> {
    if !(lambda >= 0.0) {
        return Err(Error::contract(format!("lambda_ac must be ≥ 0, got {lambda}")));
    }
    let clean = backward(net, batch)?;
    let mut grads = clean.grads;
    let mut augmented = [0.0; 3];
    if lambda > 0.0 {
        let stages = augment_batch(batch, spec, repr, rng)?;
        for (slot, stage) in augmented.iter_mut().zip(&stages) {
            let g = backward(net, stage)?;
            *slot = g.loss;
            grads.axpy(lambda, &g.grads)?;
        }
    }
    Ok(AcLoss {
        clean: clean.loss,
        augmented,
        lambda,
        grads,
    })
}

pub fn loss_ac<R: Rng + ?Sized>(
    net: &Network,
    batch: &Batch,
    spec: &AugmentationSpec,
    repr: Representation,
    lambda: f64,
    rng: &mut R,
) -> Result<f64> {
    Ok(loss_ac_with_grad(net, batch, spec, repr, lambda, rng)?.value())
}

/// `(strength / 2) Σₖ Fₖ (θₖ − θₖ^anchor)²`.
pub fn ewc_penalty(fisher: &[f64], anchor: &WeightVector, weights: &WeightVector, strength: f64) -> Result<f64> {
    check_ewc(fisher, anchor, weights)?;
    let mut s = 0.0;
    for ((f, a), w) in fisher.iter().zip(anchor.values()).zip(weights.values()) {
        let d = w - a;
        s += f * d * d;
    }
    Ok(0.5 * strength * s)
}

pub fn ewc_penalty_grad(
    fisher: &[f64],
    anchor: &WeightVector,
    weights: &WeightVector,
    strength: f64,
) -> Result<WeightVector> {
    check_ewc(fisher, anchor, weights)?;
    let mut g = weights.sub(anchor)?;
    for (v, f) in g.values_mut().iter_mut().zip(fisher) {
        *v *= strength * f;
    }
    Ok(g)
}

fn check_ewc(fisher: &[f64], anchor: &WeightVector, weights: &WeightVector) -> Result<()> {
    if fisher.len() != anchor.len() || anchor.len() != weights.len() {
        return Err(Error::contract(format!(
            "EWC lengths differ: fisher {}, anchor {}, weights {}",
            fisher.len(),
            anchor.len(),
            weights.len()
        )));
    }
    anchor.check_layout(weights)
}

/// Combined objective `L_AC + γ·L_KFAC (+ EWC)` at the network's weights,
/// honoring the strategy flags, with its gradient.
pub fn loss_total<R: Rng + ?Sized>(
    net: &Network,
    batch: &Batch,
    spec: &AugmentationSpec,
    repr: Representation,
    snapshots: &[CurvatureSnapshot],
    strategy: &StrategyConfig,
    rng: &mut R,
) -> Result<(LossParts, WeightVector)> {
    let lambda = if strategy.use_ac { strategy.lambda_ac } else { 0.0 };
    let ac = loss_ac_with_grad(net, batch, spec, repr, lambda, rng)?;
    let mut parts = LossParts {
        cls: ac.clean,
        ac_extra: lambda * (ac.augmented[0] + ac.augmented[1] + ac.augmented[2]),
        ..Default::default()
    };
    let mut grads = ac.grads;
    if (strategy.use_kfac || strategy.use_ewc) && snapshots.is_empty() {
        return Err(Error::contract(
            "curvature penalty enabled but no snapshot is available",
        ));
    }
    let theta = net.flatten();
    if strategy.use_kfac {
        for snap in snapshots {
            parts.kfac += strategy.gamma * kfac_quadratic_with(snap, &theta, strategy.penalty_form)?;
            grads.axpy(
                strategy.gamma,
                &kfac_penalty_grad_with(snap, &theta, strategy.penalty_form)?,
            )?;
        }
    }
    if strategy.use_ewc {
        for snap in snapshots {
            let fisher = snap
                .fisher_diag
                .as_deref()
                .ok_or_else(|| Error::contract("EWC enabled but the snapshot has no Fisher diagonal"))?;
            parts.ewc += ewc_penalty(fisher, &snap.anchor, &theta, strategy.ewc_strength)?;
            grads.axpy(
                1.0,
                &ewc_penalty_grad(fisher, &snap.anchor, &theta, strategy.ewc_strength)?,
            )?;
        }
    }
    Ok((parts, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{LayerShape, Layout};

    fn wv(v: &[f64]) -> WeightVector {
        WeightVector::new(
            Layout::new(&[LayerShape {
                in_dim: v.len(),
                out_dim: 1,
                bias: false,
                lora_rank: 0,
            }]),
            v.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn ewc_cases() {
        let a = wv(&[1.0, -2.0, 0.5]);
        assert_eq!(ewc_penalty(&[3.0, 1.0, 2.0], &a, &a, 4.0).unwrap(), 0.0);
        let w = wv(&[2.0, 0.0, 0.5]);
        let d2 = 1.0 + 4.0;
        assert_eq!(ewc_penalty(&[1.0; 3], &a, &w, 0.7).unwrap(), 0.35 * d2);
        assert!(matches!(ewc_penalty(&[1.0; 2], &a, &w, 1.0), Err(Error::Contract(_))));
    }
}
