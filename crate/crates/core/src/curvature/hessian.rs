//! Finite-difference Hessians used as test oracles.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::nncore::{backward, Batch, Network, WeightVector};

/// Default parameter cap for the dense finite-difference Hessian.
pub const HESSIAN_PARAM_CAP: usize = 64;
/// Central-difference step for Hessians built from exact gradients.
pub const HESSIAN_FD_STEP: f64 = 1e-4;

/// Jacobian of `grad` at `x0` by central differences: column k is
/// `(grad(x0 + eps·e_k) − grad(x0 − eps·e_k)) / (2·eps)`. Not symmetrized.
pub fn fd_jacobian<F>(grad: F, x0: &[f64], eps: f64) -> Result<Mat>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    let mut jac = Mat::zeros(n, n);
    let mut x = x0.to_vec();
    for k in 0..n {
        x[k] = x0[k] + eps;
        let gp = grad(&x)?;
        x[k] = x0[k] - eps;
        let gm = grad(&x)?;
        x[k] = x0[k];
        if gp.len() != n || gm.len() != n {
            return Err(Error::contract("gradient length does not match the point"));
        }
        for i in 0..n {
            jac[(i, k)] = (gp[i] - gm[i]) / (2.0 * eps);
        }
    }
    Ok(jac)
}

/// Symmetrized finite-difference Hessian of a scalar function given its gradient.
pub fn fd_hessian<F>(grad: F, x0: &[f64], eps: f64) -> Result<Mat>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    Ok(fd_jacobian(grad, x0, eps)?.symmetrized())
}

fn require_plain(net: &Network) -> Result<()> {
    if net.layers().iter().any(|l| l.adapter.is_some()) {
        return Err(Error::contract(
            "exact Hessian needs an adapter-free network (merge LoRA first)",
        ));
    }
    Ok(())
}

/// Gradient of mean BCE on `data` wrt layer `layer`'s weight, in column-stacking vec order.
fn layer_grad_vec(net: &Network, data: &Batch, layer: usize, w_vec: &[f64]) -> Result<Vec<f64>> {
    let slots = net.layout().layer(layer)?.clone();
    let (out, inp) = (slots.out_dim, slots.in_dim);
    let mut theta = net.flatten();
    theta.set_layer_weight(layer, &super::kron::unvec_col(w_vec, out, inp))?;
    let probe = net.with_weights(&theta)?;
    let g = backward(&probe, data)?;
    Ok(super::kron::vec_col(&g.grads.layer_weight(layer)?))
}

/// Raw (unsymmetrized) finite-difference Hessian of mean BCE wrt one layer's weight.
pub fn exact_hessian_raw(net: &Network, data: &Batch, layer: usize, cap: usize) -> Result<Mat> {
    require_plain(net)?;
    if data.is_empty() {
        return Err(Error::contract("exact_hessian on an empty dataset"));
    }
    let w = net.flatten().layer_weight(layer)?;
    let count = w.rows() * w.cols();
    if count > cap {
        return Err(Error::contract(format!(
            "layer {layer} has {count} weights, above the exact-Hessian cap of {cap}"
        )));
    }
    let w0 = super::kron::vec_col(&w);
    fd_jacobian(|x| layer_grad_vec(net, data, layer, x), &w0, HESSIAN_FD_STEP)
}

/// Hessian of mean BCE on `data` wrt layer `layer`'s weight matrix, in
/// column-stacking vec order so it lines up with `Q ⊗ H`.
pub fn exact_hessian(net: &Network, data: &Batch, layer: usize) -> Result<Mat> {
    Ok(exact_hessian_raw(net, data, layer, HESSIAN_PARAM_CAP)?.symmetrized())
}

/// Hessian of mean BCE wrt every parameter, in flat layout order.
pub fn exact_hessian_full(net: &Network, data: &Batch, cap: usize) -> Result<Mat> {
    require_plain(net)?;
    if data.is_empty() {
        return Err(Error::contract("exact_hessian on an empty dataset"));
    }
    let theta = net.flatten();
    if theta.len() > cap {
        return Err(Error::contract(format!(
            "network has {} parameters, above the exact-Hessian cap of {cap}",
            theta.len()
        )));
    }
    let layout = theta.layout().clone();
    let grad = |x: &[f64]| -> Result<Vec<f64>> {
        let probe = net.with_weights(&WeightVector::new(layout.clone(), x.to_vec())?)?;
        Ok(backward(&probe, data)?.grads.values().to_vec())
    };
    fd_hessian(grad, theta.values(), HESSIAN_FD_STEP)
}
