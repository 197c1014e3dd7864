#![allow(dead_code)]

use lmcl_core::linalg::Mat;
use lmcl_core::nncore::{backward, mean_loss, Batch, Network, WeightVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_batch(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Batch {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect();
    let labels = (0..n).map(|i| (i % 2) as u8).collect();
    Batch::from_rows(&rows, labels).unwrap()
}

pub fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

/// Random symmetric positive definite `n × n`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let a = random_mat(rng, n, n);
    let mut s = a.matmul_transposed(&a);
    s.add_diagonal(0.1);
    s
}

pub fn perturb(theta: &WeightVector, rng: &mut ChaCha8Rng, scale: f64) -> WeightVector {
    let mut out = theta.clone();
    for v in out.values_mut() {
        *v += rng.random_range(-scale..scale);
    }
    out
}

/// Largest relative error between the analytic gradient and central differences.
pub fn fd_gradient_error(net: &Network, batch: &Batch, eps: f64) -> f64 {
    let all: Vec<usize> = (0..net.flatten().len()).collect();
    fd_gradient_error_on(net, batch, eps, &all)
}

/// As [`fd_gradient_error`], restricted to the coordinates in `coords`.
pub fn fd_gradient_error_on(net: &Network, batch: &Batch, eps: f64, coords: &[usize]) -> f64 {
    let g = backward(net, batch).unwrap().grads;
    let theta = net.flatten();
    let mut worst: f64 = 0.0;
    for &k in coords {
        let mut plus = theta.clone();
        plus.values_mut()[k] += eps;
        let mut minus = theta.clone();
        minus.values_mut()[k] -= eps;
        let lp = mean_loss(&net.with_weights(&plus).unwrap(), batch).unwrap();
        let lm = mean_loss(&net.with_weights(&minus).unwrap(), batch).unwrap();
        let fd = (lp - lm) / (2.0 * eps);
        let an = g.values()[k];
        let err = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-6);
        worst = worst.max(err);
    }
    worst
}

pub fn rel_frobenius(a: &Mat, b: &Mat) -> f64 {
    a.sub(b).frobenius_norm() / b.frobenius_norm()
}
