//! Flat parameter vectors and the layout that maps them back onto layers.
//!
//! Per layer the segments are stored in a fixed order: base weight `W`
//! (row-major, out × in), bias, LoRA `A` (rank × in), LoRA `B` (out × rank).
//! Absent segments take no space.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSlots {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Range<usize>,
    pub bias: Option<Range<usize>>,
    pub lora_rank: usize,
    pub lora_a: Option<Range<usize>>,
    pub lora_b: Option<Range<usize>>,
}

impl LayerSlots {
    pub fn param_count(&self) -> usize {
        self.weight.len()
            + self.bias.as_ref().map_or(0, Range::len)
            + self.lora_a.as_ref().map_or(0, Range::len)
            + self.lora_b.as_ref().map_or(0, Range::len)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    layers: Vec<LayerSlots>,
    len: usize,
}

/// Shape summary used to build a [`Layout`]: (in, out, has_bias, lora_rank).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub in_dim: usize,
    pub out_dim: usize,
    pub bias: bool,
    pub lora_rank: usize,
}

impl Layout {
    pub fn new(shapes: &[LayerShape]) -> Self {
        let mut offset = 0;
        let mut take = |n: usize| {
            let r = offset..offset + n;
            offset += n;
            r
        };
        let layers = shapes
            .iter()
            .map(|s| {
                let weight = take(s.in_dim * s.out_dim);
                let bias = s.bias.then(|| take(s.out_dim));
                let (lora_a, lora_b) = if s.lora_rank > 0 {
                    (Some(take(s.lora_rank * s.in_dim)), Some(take(s.out_dim * s.lora_rank)))
                } else {
                    (None, None)
                };
                LayerSlots {
                    in_dim: s.in_dim,
                    out_dim: s.out_dim,
                    weight,
                    bias,
                    lora_rank: s.lora_rank,
                    lora_a,
                    lora_b,
                }
            })
            .collect();
        Self { layers, len: offset }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn layers(&self) -> &[LayerSlots] {
        &self.layers
    }

    pub fn layer(&self, index: usize) -> Result<&LayerSlots> {
        self.layers.get(index).ok_or_else(|| {
            Error::contract(format!(
                "layer index {index} out of range ({} layers)",
                self.layers.len()
            ))
        })
    }

    pub fn shapes(&self) -> Vec<LayerShape> {
        self.layers
            .iter()
            .map(|l| LayerShape {
                in_dim: l.in_dim,
                out_dim: l.out_dim,
                bias: l.bias.is_some(),
                lora_rank: l.lora_rank,
            })
            .collect()
    }
}

/// Flat view of every parameter of a network (θ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    values: Vec<f64>,
    layout: Layout,
}

impl WeightVector {
    pub fn new(layout: Layout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::contract(format!(
                "weight vector has {} values but layout expects {}",
                values.len(),
                layout.len()
            )));
        }
        Ok(Self { values, layout })
    }

    pub fn zeros(layout: Layout) -> Self {
        Self {
            values: vec![0.0; layout.len()],
            layout,
        }
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_layout(&self, other: &WeightVector) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::contract("weight vectors have different layouts"));
        }
        Ok(())
    }

    pub fn add(&self, other: &WeightVector) -> Result<WeightVector> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &WeightVector) -> Result<WeightVector> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> WeightVector {
        WeightVector {
            values: self.values.iter().map(|v| v * s).collect(),
            layout: self.layout.clone(),
        }
    }

    /// `self += s · other`
    pub fn axpy(&mut self, s: f64, other: &WeightVector) -> Result<()> {
        self.check_layout(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn dot(&self, other: &WeightVector) -> Result<f64> {
        self.check_layout(other)?;
        Ok(crate::linalg::dot(&self.values, &other.values))
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm2(&self.values)
    }

    pub fn zip_with(&self, other: &WeightVector, f: impl Fn(f64, f64) -> f64) -> Result<WeightVector> {
        self.check_layout(other)?;
        Ok(WeightVector {
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
            layout: self.layout.clone(),
        })
    }

    /// Base weight of layer `index` as an out × in matrix.
    pub fn layer_weight(&self, index: usize) -> Result<Mat> {
        let slots = self.layout.layer(index)?;
        Mat::from_vec(slots.out_dim, slots.in_dim, self.values[slots.weight.clone()].to_vec())
    }

    pub fn set_layer_weight(&mut self, index: usize, w: &Mat) -> Result<()> {
        let slots = self.layout.layer(index)?.clone();
        if w.shape() != (slots.out_dim, slots.in_dim) {
            return Err(Error::contract(format!(
                "layer {index} weight shape {:?} does not match layout ({}, {})",
                w.shape(),
                slots.out_dim,
                slots.in_dim
            )));
        }
        self.values[slots.weight].copy_from_slice(w.as_slice());
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
