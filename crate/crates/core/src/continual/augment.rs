//! The three-stage augmentation chain.
//!
//! Each stage applies a cumulative op set to the previous stage's output:
//! stage 1 flips plus a random rotation/translation, stage 2 adds scale and
//! shear, stage 3 adds `rand_n` ops drawn from the pool at magnitude
//! `rand_m / 30`.
//!
//! Raster samples (side × side, row-major) get the image ops literally.
//! Vector samples are read as consecutive coordinate pairs, each pair a
//! point in a plane: flips reflect the pairs, affine ops move every pair with
//! one shared transform, cutout zeroes whole pairs.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::nncore::Batch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolOp {
    Flip,
    Rotate,
    Translate,
    Scale,
    Contrast,
    Brightness,
    GaussianNoise,
    Cutout,
}

impl PoolOp {
    pub const ALL: [PoolOp; 8] = [
        PoolOp::Flip,
        PoolOp::Rotate,
        PoolOp::Translate,
        PoolOp::Scale,
        PoolOp::Contrast,
        PoolOp::Brightness,
        PoolOp::GaussianNoise,
        PoolOp::Cutout,
    ];

    fn geometric(self) -> bool {
        matches!(self, PoolOp::Flip | PoolOp::Rotate | PoolOp::Translate | PoolOp::Scale)
    }
}

/// How a flat sample is laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Vector,
    Raster { side: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentationSpec {
    pub flip_horizontal: bool,
    pub flip_vertical: bool,
    pub flip_prob: f64,
    pub rotate_deg: f64,
    /// Maximum translation as a fraction of the raster side or of `vector_extent`.
    pub translate: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub shear_deg: f64,
    pub rand_n: usize,
    /// RandAugment magnitude on the 0..=30 scale.
    pub rand_m: f64,
    pub pool: Vec<PoolOp>,
    /// Coordinate scale that translation fractions refer to in vector mode.
    pub vector_extent: f64,
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        Self {
            flip_horizontal: true,
            flip_vertical: true,
            flip_prob: 0.5,
            rotate_deg: 30.0,
            translate: 0.1,
            scale_min: 0.9,
            scale_max: 1.1,
            shear_deg: 10.0,
            rand_n: 3,
            rand_m: 9.0,
            pool: PoolOp::ALL.to_vec(),
            vector_extent: 4.0,
        }
    }
}

const MAX_MAGNITUDE: f64 = 30.0;

impl AugmentationSpec {
    /// Every op disabled: the chain returns three copies of the input.
    pub fn identity() -> Self {
        Self {
            flip_horizontal: false,
            flip_vertical: false,
            flip_prob: 0.0,
            rotate_deg: 0.0,
            translate: 0.0,
            scale_min: 1.0,
            scale_max: 1.0,
            shear_deg: 0.0,
            rand_n: 0,
            rand_m: 0.0,
            pool: Vec::new(),
            vector_extent: 4.0,
        }
    }

    fn flips_active(&self) -> bool {
        self.flip_prob > 0.0 && (self.flip_horizontal || self.flip_vertical)
    }

    fn rand_active(&self) -> bool {
        self.rand_n > 0 && !self.pool.is_empty()
    }

    fn uses_geometry(&self) -> bool {
        self.flips_active()
            || self.rotate_deg != 0.0
            || self.translate != 0.0
            || self.scale_min != 1.0
            || self.scale_max != 1.0
            || self.shear_deg != 0.0
            || (self.rand_active() && self.rand_m > 0.0 && self.pool.iter().any(|p| p.geometric()))
            || (self.rand_active() && self.pool.contains(&PoolOp::Flip))
    }

    /// Checks ranges and that every enabled op is supported for samples of
    /// `dim` features in `repr`.
    pub fn validate(&self, repr: Representation, dim: usize) -> Result<()> {
        let bad = |key: &str, rule: &str| Err(Error::config(format!("augmentation.{key}: must satisfy {rule}")));
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return bad("flip_prob", "0 ≤ flip_prob ≤ 1");
        }
        if !(self.rotate_deg >= 0.0 && self.rotate_deg <= 180.0) {
            return bad("rotate_deg", "0 ≤ rotate_deg ≤ 180");
        }
        if !(self.translate >= 0.0 && self.translate <= 1.0) {
            return bad("translate", "0 ≤ translate ≤ 1");
        }
        if !(self.scale_min > 0.0 && self.scale_min <= self.scale_max && self.scale_max.is_finite()) {
            return bad("scale_min", "0 < scale_min ≤ scale_max");
        }
        if !(self.shear_deg >= 0.0 && self.shear_deg < 90.0) {
            return bad("shear_deg", "0 ≤ shear_deg < 90");
        }
        if !(0.0..=MAX_MAGNITUDE).contains(&self.rand_m) {
            return bad("rand_m", "0 ≤ rand_m ≤ 30");
        }
        if !(self.vector_extent > 0.0 && self.vector_extent.is_finite()) {
            return bad("vector_extent", "vector_extent > 0");
        }
        match repr {
            Representation::Vector => {
                if self.uses_geometry() && (dim < 2 || !dim.is_multiple_of(2)) {
                    return Err(Error::config(format!(
                        "augmentation: geometric ops need an even vector dimension ≥ 2, got {dim}"
                    )));
                }
            }
            Representation::Raster { side } => {
                if side == 0 || side * side != dim {
                    return Err(Error::config(format!(
                        "augmentation: raster side {side} does not match sample dimension {dim}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn signed<R: Rng + ?Sized>(rng: &mut R, v: f64) -> f64 {
    if rng.random::<bool>() {
        v
    } else {
        -v
    }
}

/// 2-D affine map `p ↦ A·p + t`.
#[derive(Debug, Clone, Copy)]
struct Affine {
    a: [[f64; 2]; 2],
    t: [f64; 2],
}

impl Affine {
    fn new(rot_deg: f64, shear_deg: f64, scale: f64, t: [f64; 2]) -> Self {
        let (s, c) = rot_deg.to_radians().sin_cos();
        let k = shear_deg.to_radians().tan();
        // R · Shear_x · scale
        let a = [[c * scale, (c * k - s) * scale], [s * scale, (s * k + c) * scale]];
        Self { a, t }
    }

    fn is_identity(&self) -> bool {
        self.a == [[1.0, 0.0], [0.0, 1.0]] && self.t == [0.0, 0.0]
    }

    fn inverse_apply(&self, p: [f64; 2]) -> [f64; 2] {
        let [[a, b], [c, d]] = self.a;
        let det = a * d - b * c;
        let (x, y) = (p[0] - self.t[0], p[1] - self.t[1]);
        [(d * x - b * y) / det, (-c * x + a * y) / det]
    }
}

fn flip_h(x: &mut [f64], repr: Representation) {
    match repr {
        Representation::Vector => x.iter_mut().step_by(2).for_each(|v| *v = -*v),
        Representation::Raster { side } => x.chunks_mut(side).for_each(|row| row.reverse()),
    }
}

fn flip_v(x: &mut [f64], repr: Representation) {
    match repr {
        Representation::Vector => x.iter_mut().skip(1).step_by(2).for_each(|v| *v = -*v),
        Representation::Raster { side } => {
            for r in 0..side / 2 {
                for c in 0..side {
                    x.swap(r * side + c, (side - 1 - r) * side + c);
                }
            }
        }
    }
}

fn bilinear(img: &[f64], side: usize, px: f64, py: f64) -> f64 {
    let (x0, y0) = (px.floor(), py.floor());
    let (fx, fy) = (px - x0, py - y0);
    let at = |xi: f64, yi: f64| -> f64 {
        if xi < 0.0 || yi < 0.0 || xi >= side as f64 || yi >= side as f64 {
            0.0
        } else {
            img[yi as usize * side + xi as usize]
        }
    };
    (1.0 - fx) * (1.0 - fy) * at(x0, y0)
        + fx * (1.0 - fy) * at(x0 + 1.0, y0)
        + (1.0 - fx) * fy * at(x0, y0 + 1.0)
        + fx * fy * at(x0 + 1.0, y0 + 1.0)
}

/// `t` is a fraction of the raster side or of the vector extent.
fn apply_affine(x: &mut [f64], repr: Representation, map: Affine, extent: f64) {
    if map.is_identity() {
        return;
    }
    match repr {
        Representation::Vector => {
            let (tx, ty) = (map.t[0] * extent, map.t[1] * extent);
            for p in x.chunks_mut(2) {
                let (u, v) = (p[0], p[1]);
                p[0] = map.a[0][0] * u + map.a[0][1] * v + tx;
                p[1] = map.a[1][0] * u + map.a[1][1] * v + ty;
            }
        }
        Representation::Raster { side } => {
            let src = x.to_vec();
            let c = (side as f64 - 1.0) / 2.0;
            let pix = Affine {
                a: map.a,
                t: [map.t[0] * side as f64, map.t[1] * side as f64],
            };
            for r in 0..side {
                for col in 0..side {
                    let q = pix.inverse_apply([col as f64 - c, r as f64 - c]);
                    x[r * side + col] = bilinear(&src, side, q[0] + c, q[1] + c);
                }
            }
        }
    }
}

fn contrast(x: &mut [f64], factor: f64) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v = mean + factor * (*v - mean));
}

fn cutout<R: Rng + ?Sized>(x: &mut [f64], repr: Representation, m: f64, rng: &mut R) {
    match repr {
        Representation::Vector => {
            let planes = x.len() / 2;
            if planes == 0 {
                let i = rng.random_range(0..x.len());
                x[i] = 0.0;
                return;
            }
            let k = ((m * 0.5 * planes as f64).round() as usize).clamp(1, planes);
            for p in rand::seq::index::sample(rng, planes, k) {
                x[2 * p] = 0.0;
                x[2 * p + 1] = 0.0;
            }
        }
        Representation::Raster { side } => {
            let k = ((m * 0.5 * side as f64).round() as usize).clamp(1, side);
            let r0 = rng.random_range(0..=side - k);
            let c0 = rng.random_range(0..=side - k);
            for r in r0..r0 + k {
                x[r * side + c0..r * side + c0 + k].fill(0.0);
            }
        }
    }
}

fn geometric_stage<R: Rng + ?Sized>(
    x: &mut [f64],
    spec: &AugmentationSpec,
    repr: Representation,
    with_scale_shear: bool,
    rng: &mut R,
) {
    if spec.flips_active() {
        if spec.flip_horizontal && rng.random_bool(spec.flip_prob) {
            flip_h(x, repr);
        }
        if spec.flip_vertical && rng.random_bool(spec.flip_prob) {
            flip_v(x, repr);
        }
    }
    let rot = if spec.rotate_deg > 0.0 {
        uniform(rng, -spec.rotate_deg, spec.rotate_deg)
    } else {
        0.0
    };
    let t = if spec.translate > 0.0 {
        [
            uniform(rng, -spec.translate, spec.translate),
            uniform(rng, -spec.translate, spec.translate),
        ]
    } else {
        [0.0, 0.0]
    };
    let (scale, shear) = if with_scale_shear {
        let s = if spec.scale_min < spec.scale_max {
            uniform(rng, spec.scale_min, spec.scale_max)
        } else {
            spec.scale_min
        };
        let k = if spec.shear_deg > 0.0 {
            uniform(rng, -spec.shear_deg, spec.shear_deg)
        } else {
            0.0
        };
        (s, k)
    } else {
        (1.0, 0.0)
    };
    apply_affine(x, repr, Affine::new(rot, shear, scale, t), spec.vector_extent);
}

fn pool_op<R: Rng + ?Sized>(
    x: &mut [f64],
    op: PoolOp,
    m: f64,
    spec: &AugmentationSpec,
    repr: Representation,
    rng: &mut R,
) {
    if m == 0.0 && op != PoolOp::Flip {
        return;
    }
    match op {
        PoolOp::Flip => flip_h(x, repr),
        PoolOp::Rotate => {
            let a = signed(rng, 30.0 * m);
            apply_affine(x, repr, Affine::new(a, 0.0, 1.0, [0.0, 0.0]), spec.vector_extent);
        }
        PoolOp::Translate => {
            let t = [signed(rng, 0.3 * m), signed(rng, 0.3 * m)];
            apply_affine(x, repr, Affine::new(0.0, 0.0, 1.0, t), spec.vector_extent);
        }
        PoolOp::Scale => {
            let s = 1.0 + signed(rng, 0.5 * m);
            apply_affine(x, repr, Affine::new(0.0, 0.0, s, [0.0, 0.0]), spec.vector_extent);
        }
        PoolOp::Contrast => contrast(x, 1.0 + signed(rng, 0.9 * m)),
        PoolOp::Brightness => {
            let b = signed(rng, 0.5 * m);
            x.iter_mut().for_each(|v| *v += b);
        }
        PoolOp::GaussianNoise => {
            let sd = 0.3 * m;
            x.iter_mut()
                .for_each(|v| *v += sd * rng.sample::<f64, _>(StandardNormal));
        }
        PoolOp::Cutout => cutout(x, repr, m, rng),
    }
}

/// The three chain stages for one sample: `x₁ = S₁(x)`, `x₂ = S₂(x₁)`,
/// `x₃ = S₃(x₂)`. Assumes `spec` was validated for `repr` and `x.len()`.
pub fn augment_chain<R: Rng + ?Sized>(
    x: &[f64],
    spec: &AugmentationSpec,
    repr: Representation,
    rng: &mut R,
) -> [Vec<f64>; 3] {
    let mut x1 = x.to_vec();
    geometric_stage(&mut x1, spec, repr, false, rng);
    let mut x2 = x1.clone();
    geometric_stage(&mut x2, spec, repr, true, rng);
    let mut x3 = x2.clone();
    geometric_stage(&mut x3, spec, repr, true, rng);
    if spec.rand_active() {
        let m = spec.rand_m / MAX_MAGNITUDE;
        for _ in 0..spec.rand_n {
            let op = spec.pool[rng.random_range(0..spec.pool.len())];
            pool_op(&mut x3, op, m, spec, repr, rng);
        }
    }
    [x1, x2, x3]
}

/// Runs the chain on every sample of `batch` in order, returning one batch per stage.
pub fn augment_batch<R: Rng + ?Sized>(
    batch: &Batch,
    spec: &AugmentationSpec,
    repr: Representation,
    rng: &mut R,
) -> Result<[Batch; 3]> {
    let (n, d) = (batch.len(), batch.dim());
    let mut stages = [Mat::zeros(n, d), Mat::zeros(n, d), Mat::zeros(n, d)];
    for i in 0..n {
        let out = augment_chain(batch.sample(i), spec, repr, rng);
        for (s, v) in stages.iter_mut().zip(out) {
            s.row_mut(i).copy_from_slice(&v);
        }
    }
    let [a, b, c] = stages;
    Ok([batch.with_inputs(a)?, batch.with_inputs(b)?, batch.with_inputs(c)?])
}
