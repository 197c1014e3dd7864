//! Measured forgetting, its second-order estimate and the multitask loss bound.

use serde::{Deserialize, Serialize};

use crate::curvature::{kfac_quadratic, max_eigenvalue, CurvatureSnapshot};
use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};
use crate::nncore::{mean_loss, Batch, Network, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurvatureSource {
    ExactOracle,
    Kfac,
}

/// A curvature model anchored at the previous solution.
pub trait CurvatureOperator {
    fn anchor(&self) -> &WeightVector;

    /// `½ (θ − anchor)ᵀ C (θ − anchor)`.
    fn half_quadratic(&self, theta: &WeightVector) -> Result<f64>;

    fn source(&self) -> CurvatureSource;
}

impl CurvatureOperator for CurvatureSnapshot {
    fn anchor(&self) -> &WeightVector {
        &self.anchor
    }

    fn half_quadratic(&self, theta: &WeightVector) -> Result<f64> {
        kfac_quadratic(self, theta)
    }

    fn source(&self) -> CurvatureSource {
        CurvatureSource::Kfac
    }
}

/// Dense Hessian over every parameter in flat layout order.
#[derive(Debug, Clone)]
pub struct DenseCurvature {
    pub anchor: WeightVector,
    pub hessian: Mat,
}

impl DenseCurvature {
    pub fn new(anchor: WeightVector, hessian: Mat) -> Result<Self> {
        if hessian.shape() != (anchor.len(), anchor.len()) {
            return Err(Error::contract("dense Hessian does not match the anchor length"));
        }
        Ok(Self { anchor, hessian })
    }

    /// Largest eigenvalue by power iteration.
    pub fn lambda_max(&self) -> Result<f64> {
        Ok(max_eigenvalue(|v| self.hessian.matvec(v), self.anchor.len(), 1e-12, 100_000)?.value)
    }
}

impl CurvatureOperator for DenseCurvature {
    fn anchor(&self) -> &WeightVector {
        &self.anchor
    }

    fn half_quadratic(&self, theta: &WeightVector) -> Result<f64> {
        let d = theta.sub(&self.anchor)?;
        Ok(0.5 * dot(d.values(), &self.hessian.matvec(d.values())))
    }

    fn source(&self) -> CurvatureSource {
        CurvatureSource::ExactOracle
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgettingRecord {
    /// Index of the task whose loss is tracked (the previous task).
    pub task: usize,
    pub actual: f64,
    pub estimated: f64,
    pub displacement_norm: f64,
    pub curvature_source: CurvatureSource,
}

/// `L(θ_t) − L(θ_prev)` for an arbitrary loss.
pub fn forgetting_actual_with<F>(loss: F, theta_prev: &WeightVector, theta_t: &WeightVector) -> Result<f64>
where
    F: Fn(&WeightVector) -> Result<f64>,
{
    theta_prev.check_layout(theta_t)?;
    Ok(loss(theta_t)? - loss(theta_prev)?)
}

/// Increase of mean BCE on `data_prev` when moving from `theta_prev` to `theta_t`.
pub fn forgetting_actual(
    template: &Network,
    theta_prev: &WeightVector,
    theta_t: &WeightVector,
    data_prev: &Batch,
) -> Result<f64> {
    if data_prev.is_empty() {
        return Err(Error::contract("forgetting_actual on an empty dataset"));
    }
    forgetting_actual_with(
        |theta| mean_loss(&template.with_weights(theta)?, data_prev),
        theta_prev,
        theta_t,
    )
}

/// `½ Δθᵀ ∇²L Δθ` with Δθ = θ_t − θ_prev; the curvature must be anchored at θ_prev.
pub fn forgetting_quadratic<C: CurvatureOperator + ?Sized>(
    theta_prev: &WeightVector,
    theta_t: &WeightVector,
    curvature: &C,
) -> Result<f64> {
    theta_prev.check_layout(theta_t)?;
    let anchor = curvature.anchor();
    theta_prev.check_layout(anchor)?;
    let same = anchor
        .values()
        .iter()
        .zip(theta_prev.values())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    if !same {
        return Err(Error::contract("curvature is not anchored at the previous weights"));
    }
    curvature.half_quadratic(theta_t)
}

pub fn forgetting_record<C: CurvatureOperator + ?Sized>(
    task: usize,
    template: &Network,
    theta_prev: &WeightVector,
    theta_t: &WeightVector,
    data_prev: &Batch,
    curvature: &C,
) -> Result<ForgettingRecord> {
    Ok(ForgettingRecord {
        task,
        actual: forgetting_actual(template, theta_prev, theta_t, data_prev)?,
        estimated: forgetting_quadratic(theta_prev, theta_t, curvature)?,
        displacement_norm: theta_t.sub(theta_prev)?.norm(),
        curvature_source: curvature.source(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRecord {
    /// Σ_t L_t(θ*)
    pub lhs: f64,
    /// Σ_t L_t(θ_t) + ½·λ^max·Σ_t ‖θ* − θ_t‖²
    pub rhs: f64,
    pub lambda_max: f64,
    pub holds: bool,
}

/// Slack allowed on the `lhs ≤ rhs` comparison.
pub const BOUND_SLACK: f64 = 1e-8;

/// Checks the aggregated second-order bound on the multitask loss at `theta_star`.
pub fn bound_check(
    theta_star: &WeightVector,
    minima: &[WeightVector],
    losses_at_star: &[f64],
    losses_at_minima: &[f64],
    lambda_max_list: &[f64],
) -> Result<BoundRecord> {
    let t = minima.len();
    if t == 0 || losses_at_star.len() != t || losses_at_minima.len() != t || lambda_max_list.len() != t {
        return Err(Error::contract(
            "bound_check needs one loss pair and eigenvalue per task",
        ));
    }
    let lambda_max = lambda_max_list.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut dist2 = 0.0;
    for m in minima {
        let d = theta_star.sub(m)?.norm();
        dist2 += d * d;
    }
    let lhs: f64 = losses_at_star.iter().sum();
    let rhs = losses_at_minima.iter().sum::<f64>() + 0.5 * lambda_max * dist2;
    Ok(BoundRecord {
        lhs,
        rhs,
        lambda_max,
        holds: lhs <= rhs + BOUND_SLACK,
    })
}
