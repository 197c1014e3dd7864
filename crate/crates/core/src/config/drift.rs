//! Seeded "generator drift" task streams.
//!
//! Vector mode: coordinates come in pairs (planes). The real class is a
//! two-component Gaussian mixture at ±`real_radius` on the first axis.
//! A fake sample is a real sample whose plane `1 + family` is offset by
//! `shift` at angle `angle_deg`, plus a warp `A·sin(ω·x₀)` on the plane's
//! second axis. Each task advances the angle and warp frequency; family
//! switches move the offset to a fresh plane.
//!
//! Raster mode: real textures are smooth random sinusoids; fakes add a
//! periodic artifact whose orientation and frequency drift per task.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, StreamRepresentation};
use crate::continual::TaskDataset;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::nncore::Batch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriftSchedule {
    /// Every task reuses task 1's parameters.
    pub no_drift: bool,
    pub angle_step_deg: f64,
    pub shift: f64,
    pub shift_step: f64,
    pub warp_amplitude: f64,
    pub warp_freq: f64,
    pub warp_freq_step: f64,
    /// 1-based tasks at which a new generator family starts.
    pub family_switches: Vec<usize>,
    pub real_radius: f64,
    pub noise: f64,
}

impl Default for DriftSchedule {
    fn default() -> Self {
        Self {
            no_drift: false,
            angle_step_deg: 15.0,
            shift: 2.5,
            shift_step: 0.0,
            warp_amplitude: 0.3,
            warp_freq: 1.0,
            warp_freq_step: 0.5,
            family_switches: vec![4],
            real_radius: 2.0,
            noise: 0.6,
        }
    }
}

/// Parameters of the fake-class generator for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftParams {
    pub task: usize,
    pub angle_deg: f64,
    pub shift: f64,
    pub warp_amplitude: f64,
    pub warp_freq: f64,
    pub family: usize,
}

impl DriftSchedule {
    pub fn params(&self, task: usize) -> DriftParams {
        let k = if self.no_drift { 0.0 } else { (task - 1) as f64 };
        let family = if self.no_drift {
            0
        } else {
            self.family_switches.iter().filter(|s| **s <= task).count()
        };
        DriftParams {
            task,
            angle_deg: k * self.angle_step_deg,
            shift: self.shift + k * self.shift_step,
            warp_amplitude: self.warp_amplitude,
            warp_freq: self.warp_freq + k * self.warp_freq_step,
            family,
        }
    }

    pub fn families(&self) -> usize {
        1 + self.family_switches.len()
    }

    pub fn validate(&self, tasks: usize) -> Result<()> {
        let bad = |key: &str, rule: &str| Err(Error::config(format!("stream.drift.{key}: must satisfy {rule}")));
        for (k, v) in [
            ("angle_step_deg", self.angle_step_deg),
            ("shift", self.shift),
            ("shift_step", self.shift_step),
            ("warp_amplitude", self.warp_amplitude),
            ("warp_freq", self.warp_freq),
            ("warp_freq_step", self.warp_freq_step),
            ("real_radius", self.real_radius),
            ("noise", self.noise),
        ] {
            if !v.is_finite() {
                return bad(k, "a finite value");
            }
        }
        if !(self.noise > 0.0) {
            return bad("noise", "noise > 0");
        }
        if self.family_switches.windows(2).any(|w| w[0] >= w[1]) || self.family_switches.first().is_some_and(|s| *s < 2)
        {
            return bad("family_switches", "strictly increasing task indices ≥ 2");
        }
        let drifts = self.angle_step_deg != 0.0
            || self.shift_step != 0.0
            || self.warp_freq_step != 0.0
            || self.family_switches.iter().any(|s| *s <= tasks);
        if !self.no_drift && tasks > 1 && !drifts {
            return bad("angle_step_deg", "a nonzero drift step unless no_drift is set");
        }
        Ok(())
    }
}

fn balanced_labels<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<u8> {
    let fake = n / 2;
    let mut labels: Vec<u8> = std::iter::repeat_n(0, n - fake)
        .chain(std::iter::repeat_n(1, fake))
        .collect();
    labels.shuffle(rng);
    labels
}

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn vector_sample<R: Rng + ?Sized>(dim: usize, label: u8, p: &DriftParams, d: &DriftSchedule, rng: &mut R) -> Vec<f64> {
    let mut x: Vec<f64> = (0..dim).map(|_| d.noise * gauss(rng)).collect();
    let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
    x[0] += side * d.real_radius;
    if label == 1 {
        let planes = dim / 2;
        let plane = 1 + p.family % (planes - 1);
        let (s, c) = p.angle_deg.to_radians().sin_cos();
        x[2 * plane] += p.shift * c;
        x[2 * plane + 1] += p.shift * s + p.warp_amplitude * (p.warp_freq * x[0]).sin();
    }
    x
}

const RASTER_SIDE: usize = 16;

fn raster_sample<R: Rng + ?Sized>(label: u8, p: &DriftParams, d: &DriftSchedule, rng: &mut R) -> Vec<f64> {
    let n = RASTER_SIDE as f64;
    let (fa, fb) = (rng.random_range(0.5..1.5), rng.random_range(0.5..1.5));
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let (s, c) = p.angle_deg.to_radians().sin_cos();
    let amp = 0.04 * p.shift;
    let mut img = Vec::with_capacity(RASTER_SIDE * RASTER_SIDE);
    for r in 0..RASTER_SIDE {
        for col in 0..RASTER_SIDE {
            let (x, y) = (col as f64, r as f64);
            let mut v = 0.5 + 0.25 * (std::f64::consts::TAU * (fa * x + fb * y) / n + phase).sin();
            v += 0.1 * d.noise * gauss(rng);
            if label == 1 {
                let wave = (std::f64::consts::TAU * p.warp_freq * (x * c + y * s) / 4.0).cos();
                v += match p.family % 2 {
                    0 => amp * wave,
                    _ => amp * wave.signum(),
                };
            }
            img.push(v);
        }
    }
    img
}

fn build_split<R: Rng + ?Sized>(cfg: &ExperimentConfig, n: usize, p: &DriftParams, rng: &mut R) -> Result<Batch> {
    let labels = balanced_labels(n, rng);
    let dim = cfg.input_dim();
    let mut data = Vec::with_capacity(n * dim);
    for &y in &labels {
        let x = match cfg.stream.representation {
            StreamRepresentation::Vector => vector_sample(dim, y, p, &cfg.stream.drift, rng),
            StreamRepresentation::Raster16 => raster_sample(y, p, &cfg.stream.drift, rng),
        };
        // features are stored as f32 so dataset files round-trip exactly
        data.extend(x.into_iter().map(|v| f64::from(v as f32)));
    }
    Batch::new(Mat::from_vec(n, dim, data)?, labels)
}

/// Task `task` (1-based) of the stream for `seed`. Each task draws from its
/// own RNG stream, so a task does not depend on how many tasks precede it.
pub fn make_task(cfg: &ExperimentConfig, seed: u64, task: usize) -> Result<TaskDataset> {
    let p = cfg.stream.drift.params(task);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1000 + task as u64);
    let train = build_split(cfg, cfg.stream.train_per_task, &p, &mut rng)?;
    let test = build_split(cfg, cfg.stream.test_per_task, &p, &mut rng)?;
    Ok(TaskDataset {
        id: task,
        train,
        test,
        meta: p,
    })
}

pub fn make_stream(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<TaskDataset>> {
    cfg.validate()?;
    (1..=cfg.stream.tasks).map(|t| make_task(cfg, seed, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_drift_repeats_task_one() {
        let d = DriftSchedule {
            no_drift: true,
            ..Default::default()
        };
        let p1 = d.params(1);
        for t in 2..6 {
            let p = d.params(t);
            assert_eq!(
                (p.angle_deg, p.shift, p.warp_freq, p.family),
                (p1.angle_deg, p1.shift, p1.warp_freq, p1.family)
            );
        }
    }

    #[test]
    fn later_tasks_drift() {
        let d = DriftSchedule::default();
        assert_eq!(d.params(1).angle_deg, 0.0);
        assert_eq!(d.params(3).angle_deg, 30.0);
        assert_eq!(d.params(3).family, 0);
        assert_eq!(d.params(4).family, 1);
    }

    #[test]
    fn splits_are_balanced_and_deterministic() {
        let cfg = ExperimentConfig::default();
        let a = make_stream(&cfg, 5).unwrap();
        let b = make_stream(&cfg, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        for t in &a {
            for split in [&t.train, &t.test] {
                let fakes = split.labels().iter().filter(|y| **y == 1).count();
                assert!(fakes.abs_diff(split.len() - fakes) <= 1);
            }
        }
        assert_ne!(make_stream(&cfg, 6).unwrap()[0].train, a[0].train);
    }

    #[test]
    fn raster_stream_shape() {
        let mut cfg = ExperimentConfig::default();
        cfg.stream.representation = StreamRepresentation::Raster16;
        cfg.stream.tasks = 2;
        cfg.stream.train_per_task = 10;
        cfg.stream.test_per_task = 10;
        let s = make_stream(&cfg, 0).unwrap();
        assert_eq!(s[0].train.dim(), 256);
    }
}
