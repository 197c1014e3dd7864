//! Empirical Fisher diagonal for EWC.

use crate::error::{Error, Result};
use crate::nncore::{backward, Batch, Network};

/// Mean over samples of the squared per-sample gradient.
pub fn fisher_diag(net: &Network, data: &Batch) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::contract("fisher_diag on an empty dataset"));
    }
    let mut grads = Vec::with_capacity(data.len());
    for i in 0..data.len() {
        grads.push(backward(net, &data.select(&[i]))?.grads.values().to_vec());
    }
    fisher_from_sample_grads(&grads)
}

/// `F_k = (1/n) Σ_i g_{i,k}²` over per-sample gradient vectors.
pub fn fisher_from_sample_grads(grads: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = grads.first() else {
        return Err(Error::contract("no per-sample gradients"));
    };
    let inv_n = 1.0 / grads.len() as f64;
    let mut out = vec![0.0; first.len()];
    for g in grads {
        if g.len() != out.len() {
            return Err(Error::contract("per-sample gradients have differing lengths"));
        }
        for (o, v) in out.iter_mut().zip(g) {
            *o += v * v;
        }
    }
    out.iter_mut().for_each(|o| *o *= inv_n);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradients_give_zero_fisher() {
        let f = fisher_from_sample_grads(&[vec![0.0; 3], vec![0.0; 3]]).unwrap();
        assert_eq!(f, vec![0.0; 3]);
    }

    #[test]
    fn single_sample_is_elementwise_square() {
        let f = fisher_from_sample_grads(&[vec![1.5, -2.0, 0.25]]).unwrap();
        assert_eq!(f, vec![2.25, 4.0, 0.0625]);
    }

    #[test]
    fn doubling_gradients_quadruples_entries() {
        let g = vec![vec![0.3, -1.1, 2.0], vec![0.7, 0.2, -0.4]];
        let g2: Vec<Vec<f64>> = g.iter().map(|v| v.iter().map(|x| 2.0 * x).collect()).collect();
        let f = fisher_from_sample_grads(&g).unwrap();
        let f2 = fisher_from_sample_grads(&g2).unwrap();
        for (a, b) in f.iter().zip(&f2) {
            assert_eq!(4.0 * a, *b);
        }
    }

    #[test]
    fn empty_data_is_rejected() {
        assert!(fisher_from_sample_grads(&[]).is_err());
    }
}
