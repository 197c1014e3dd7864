use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Elementwise nonlinearity applied after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, h: f64) -> f64 {
        match self {
            Activation::Relu => h.max(0.0),
            Activation::Sigmoid => sigmoid(h),
            Activation::Identity => h,
        }
    }

    /// Derivative with respect to the pre-activation. ReLU uses 0 at the kink.
    #[inline]
    pub fn derivative(self, h: f64) -> f64 {
        match self {
            Activation::Relu => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(h);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Identity => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Sigmoid),
            2 => Ok(Activation::Identity),
            other => Err(Error::Format(format!("unknown activation code {other}"))),
        }
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Low-rank adapter `scale · B·A` added to a frozen base weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraAdapter {
    /// rank × in
    pub a: Mat,
    /// out × rank
    pub b: Mat,
    pub scale: f64,
}

impl LoraAdapter {
    /// `A` is drawn uniformly in `±1/sqrt(in)`, `B` starts at zero so the
    /// adapter contributes nothing until trained.
    pub fn new<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rank: usize, rng: &mut R) -> Result<Self> {
        if rank == 0 || rank >= in_dim.min(out_dim) {
            return Err(Error::config(format!(
                "LoRA rank {rank} must satisfy 0 < rank < min(in={in_dim}, out={out_dim})"
            )));
        }
        let bound = 1.0 / (in_dim as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("valid bounds");
        let a_data = (0..rank * in_dim).map(|_| dist.sample(rng)).collect();
        Ok(Self {
            a: Mat::from_vec(rank, in_dim, a_data)?,
            b: Mat::zeros(out_dim, rank),
            scale: 1.0,
        })
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.a.rows()
    }

    /// `scale · B·A` as an out × in matrix.
    pub fn delta(&self) -> Mat {
        self.b.matmul(&self.a).scale(self.scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// out × in
    pub weight: Mat,
    pub bias: Option<Vec<f64>>,
    pub activation: Activation,
    /// When present the base weight and bias are frozen; only `A` and `B` train.
    pub adapter: Option<LoraAdapter>,
}

impl DenseLayer {
    /// He-uniform init for ReLU layers, Xavier-uniform otherwise. Biases start at zero.
    pub fn random<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::config("layer dims must be > 0"));
        }
        let limit = match activation {
            Activation::Relu => (6.0 / in_dim as f64).sqrt(),
            _ => (6.0 / (in_dim + out_dim) as f64).sqrt(),
        };
        let dist = Uniform::new_inclusive(-limit, limit).expect("valid bounds");
        let data = (0..in_dim * out_dim).map(|_| dist.sample(rng)).collect();
        Ok(Self {
            weight: Mat::from_vec(out_dim, in_dim, data)?,
            bias: bias.then(|| vec![0.0; out_dim]),
            activation,
            adapter: None,
        })
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    /// `W + scale·B·A` when an adapter is attached, `W` otherwise.
    pub fn effective_weight(&self) -> Mat {
        match &self.adapter {
            Some(adapter) => self.weight.add(&adapter.delta()),
            None => self.weight.clone(),
        }
    }

    #[inline]
    pub fn base_frozen(&self) -> bool {
        self.adapter.is_some()
    }

    pub fn attach_lora<R: Rng + ?Sized>(&mut self, rank: usize, rng: &mut R) -> Result<()> {
        self.adapter = Some(LoraAdapter::new(self.in_dim(), self.out_dim(), rank, rng)?);
        Ok(())
    }
}

/// Folds the adapter into the base weight: `W' = W + scale·B·A`.
pub fn lora_merge(layer: &DenseLayer) -> Result<DenseLayer> {
    if layer.adapter.is_none() {
        return Err(Error::contract("lora_merge called on a layer without an adapter"));
    }
    Ok(DenseLayer {
        weight: layer.effective_weight(),
        bias: layer.bias.clone(),
        activation: layer.activation,
        adapter: None,
    })
}
