//! Kronecker-structured quadratic penalties.
//!
//! vec is column-stacking. For an out × in matrix X, H (out × out) and
//! Q (in × in), `(Q ⊗ H)·vec(X) = vec(H·X·Qᵀ)`; with symmetric Q this is
//! `vec(H·X·Q)`, which is what the penalty evaluates layer by layer.

use super::factors::CurvatureSnapshot;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::nncore::WeightVector;

/// Largest side length `kron_explicit` will build.
pub const KRON_ORACLE_CAP: usize = 4096;

/// Explicit `Q ⊗ H`: block (i, j) equals `Q[i, j] · H`. Test oracle only.
pub fn kron_explicit(q: &Mat, h: &Mat) -> Result<Mat> {
    kron_explicit_capped(q, h, KRON_ORACLE_CAP)
}

pub fn kron_explicit_capped(q: &Mat, h: &Mat, cap: usize) -> Result<Mat> {
    if q.rows() != q.cols() || h.rows() != h.cols() {
        return Err(Error::contract("kron_explicit expects square factors"));
    }
    let (p, r) = (q.rows(), h.rows());
    let n = p * r;
    if n > cap {
        return Err(Error::contract(format!(
            "Kronecker product of side {n} exceeds the oracle cap {cap}"
        )));
    }
    let mut out = Mat::zeros(n, n);
    for i in 0..p {
        for j in 0..p {
            let qij = q[(i, j)];
            for a in 0..r {
                for b in 0..r {
                    out[(i * r + a, j * r + b)] = qij * h[(a, b)];
                }
            }
        }
    }
    Ok(out)
}

/// Column-stacking vec of an out × in matrix.
pub fn vec_col(x: &Mat) -> Vec<f64> {
    let (rows, cols) = x.shape();
    let mut v = Vec::with_capacity(rows * cols);
    for j in 0..cols {
        for i in 0..rows {
            v.push(x[(i, j)]);
        }
    }
    v
}

/// Inverse of [`vec_col`].
pub fn unvec_col(v: &[f64], rows: usize, cols: usize) -> Mat {
    assert_eq!(v.len(), rows * cols);
    let mut x = Mat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            x[(i, j)] = v[j * rows + i];
        }
    }
    x
}

/// `½ ⟨ΔW, H·ΔW·Q⟩_F` for one layer.
#[inline]
pub fn layer_quadratic(delta: &Mat, q: &Mat, h: &Mat) -> f64 {
    0.5 * delta.frobenius_dot(&h.matmul(delta).matmul(q))
}

/// Penalty weighting, see [`CurvatureSnapshot::kfac_quadratic`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyForm {
    /// ΔW weighted by the curvature approximation `Q ⊗ H`.
    #[default]
    Hessian,
    /// ΔW weighted by `(Q ⊗ H)⁻¹ = Q⁻¹ ⊗ H⁻¹`; kept for comparison only.
    InverseHessian,
}

fn layer_deltas(snapshot: &CurvatureSnapshot, weights: &WeightVector) -> Result<Vec<Mat>> {
    if weights.layout() != snapshot.anchor.layout() {
        return Err(Error::contract(
            "weights layout does not match the curvature snapshot anchor",
        ));
    }
    (0..snapshot.factors.len())
        .map(|m| Ok(weights.layer_weight(m)?.sub(&snapshot.anchor.layer_weight(m)?)))
        .collect()
}

/// `½ Σ_m ⟨ΔW_m, H_m·ΔW_m·Q_m⟩_F` with `ΔW_m = W_m − W_m^pre`. Biases and
/// adapter parameters are not penalized.
pub fn kfac_quadratic(snapshot: &CurvatureSnapshot, weights: &WeightVector) -> Result<f64> {
    kfac_quadratic_with(snapshot, weights, PenaltyForm::Hessian)
}

pub fn kfac_quadratic_with(snapshot: &CurvatureSnapshot, weights: &WeightVector, form: PenaltyForm) -> Result<f64> {
    let deltas = layer_deltas(snapshot, weights)?;
    let mut total = 0.0;
    for (m, (delta, f)) in deltas.iter().zip(&snapshot.factors).enumerate() {
        total += match form {
            PenaltyForm::Hessian => layer_quadratic(delta, &f.q, &f.h),
            PenaltyForm::InverseHessian => {
                let (qi, hi) = inverse_factors(f, m)?;
                layer_quadratic(delta, &qi, &hi)
            }
        };
    }
    Ok(total)
}

/// Gradient of [`kfac_quadratic`]: `H_m·ΔW_m·Q_m` on each weight block, zero elsewhere.
pub fn kfac_penalty_grad(snapshot: &CurvatureSnapshot, weights: &WeightVector) -> Result<WeightVector> {
    kfac_penalty_grad_with(snapshot, weights, PenaltyForm::Hessian)
}

pub fn kfac_penalty_grad_with(
    snapshot: &CurvatureSnapshot,
    weights: &WeightVector,
    form: PenaltyForm,
) -> Result<WeightVector> {
    let deltas = layer_deltas(snapshot, weights)?;
    let mut grad = WeightVector::zeros(weights.layout().clone());
    for (m, (delta, f)) in deltas.iter().zip(&snapshot.factors).enumerate() {
        let g = match form {
            PenaltyForm::Hessian => f.h.matmul(delta).matmul(&f.q),
            PenaltyForm::InverseHessian => {
                let (qi, hi) = inverse_factors(f, m)?;
                hi.matmul(delta).matmul(&qi)
            }
        };
        grad.set_layer_weight(m, &g)?;
    }
    Ok(grad)
}

fn inverse_factors(f: &super::factors::LayerFactors, m: usize) -> Result<(Mat, Mat)> {
    let qi =
        f.q.spd_inverse()
            .map_err(|e| Error::contract(format!("layer {m} Q factor: {e}")))?;
    let hi =
        f.h.spd_inverse()
            .map_err(|e| Error::contract(format!("layer {m} H factor: {e}")))?;
    Ok((qi, hi))
}
