//! Experiment configuration and synthetic task streams.
//!
//! Configs are JSON. Every section has defaults, unknown keys are rejected,
//! and the fully-populated config is echoed into each run report.

mod drift;

use serde::{Deserialize, Serialize};

pub use drift::{make_stream, make_task, DriftParams, DriftSchedule};

use crate::continual::{AugmentationSpec, Representation, StrategyConfig};
use crate::error::{Error, Result};
use crate::nncore::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamRepresentation {
    #[default]
    Vector,
    /// 16 × 16 grayscale textures.
    Raster16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StreamSpec {
    pub tasks: usize,
    pub train_per_task: usize,
    pub test_per_task: usize,
    pub representation: StreamRepresentation,
    /// Feature count in vector mode; raster mode always has 256.
    pub dim: usize,
    pub drift: DriftSchedule,
}

impl Default for StreamSpec {
    fn default() -> Self {
        Self {
            tasks: 6,
            train_per_task: 2000,
            test_per_task: 400,
            representation: StreamRepresentation::Vector,
            dim: 8,
            drift: DriftSchedule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSpec {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub bias: bool,
    /// One entry per layer (hidden layers then the head).
    pub lora_mask: Vec<bool>,
    pub lora_rank: usize,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            activation: Activation::Relu,
            bias: true,
            lora_mask: vec![false, true, false],
            lora_rank: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSpec {
    pub batch_size: usize,
    /// Epochs of the offline fit on task 1 (and of each joint retrain).
    pub offline_epochs: usize,
    pub offline_lr: f64,
    /// Added to both Kronecker factors.
    pub damping: f64,
    /// Leading fraction of a new task's training set used to decide whether to train.
    pub trigger_fraction: f64,
}

impl Default for TrainingSpec {
    fn default() -> Self {
        Self {
            batch_size: 32,
            offline_epochs: 50,
            offline_lr: 1e-3,
            damping: 1e-4,
            trigger_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSpec {
    pub enabled: bool,
    pub points: usize,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            points: crate::connectivity::DEFAULT_GRID_POINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub stream: StreamSpec,
    pub network: NetworkSpec,
    pub strategy: StrategyConfig,
    pub augmentation: AugmentationSpec,
    pub training: TrainingSpec,
    pub scan: ScanSpec,
    pub seeds: Vec<u64>,
    pub output_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            stream: StreamSpec::default(),
            network: NetworkSpec::default(),
            strategy: StrategyConfig::default(),
            augmentation: AugmentationSpec::default(),
            training: TrainingSpec::default(),
            scan: ScanSpec::default(),
            seeds: vec![0],
            output_dir: "runs".into(),
        }
    }
}

fn bad<T>(key: &str, rule: &str) -> Result<T> {
    Err(Error::config(format!("{key}: must satisfy {rule}")))
}

impl ExperimentConfig {
    pub fn input_dim(&self) -> usize {
        match self.stream.representation {
            StreamRepresentation::Vector => self.stream.dim,
            StreamRepresentation::Raster16 => 256,
        }
    }

    pub fn representation(&self) -> Representation {
        match self.stream.representation {
            StreamRepresentation::Vector => Representation::Vector,
            StreamRepresentation::Raster16 => Representation::Raster { side: 16 },
        }
    }

    /// Checks every constraint; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let s = &self.stream;
        if s.tasks == 0 {
            return bad("stream.tasks", "tasks ≥ 1");
        }
        if s.train_per_task < 2 {
            return bad("stream.train_per_task", "train_per_task ≥ 2");
        }
        if s.test_per_task < 2 {
            return bad("stream.test_per_task", "test_per_task ≥ 2");
        }
        if s.representation == StreamRepresentation::Vector && (s.dim < 4 || !s.dim.is_multiple_of(2)) {
            return bad("stream.dim", "dim even and ≥ 4");
        }
        s.drift.validate(s.tasks)?;

        let n = &self.network;
        if n.hidden.contains(&0) {
            return bad("network.hidden", "every width ≥ 1");
        }
        let layers = n.hidden.len() + 1;
        if n.lora_mask.len() != layers {
            return Err(Error::config(format!(
                "network.lora_mask: must have one entry per layer ({layers}), got {}",
                n.lora_mask.len()
            )));
        }
        let mut dims = vec![self.input_dim()];
        dims.extend_from_slice(&n.hidden);
        dims.push(1);
        for (m, on) in n.lora_mask.iter().enumerate() {
            let limit = dims[m].min(dims[m + 1]);
            if *on && (n.lora_rank == 0 || n.lora_rank >= limit) {
                return Err(Error::config(format!(
                    "network.lora_rank: must satisfy 0 < lora_rank < {limit} for layer {m} ({} → {})",
                    dims[m],
                    dims[m + 1]
                )));
            }
        }

        self.strategy.validate()?;
        self.augmentation.validate(self.representation(), self.input_dim())?;

        let t = &self.training;
        if t.batch_size == 0 {
            return bad("training.batch_size", "batch_size ≥ 1");
        }
        if t.offline_epochs == 0 {
            return bad("training.offline_epochs", "offline_epochs ≥ 1");
        }
        if !(t.offline_lr >= 0.0 && t.offline_lr.is_finite()) {
            return bad("training.offline_lr", "offline_lr ≥ 0");
        }
        if !(t.damping > 0.0 && t.damping.is_finite()) {
            return bad("training.damping", "damping > 0");
        }
        if !(t.trigger_fraction > 0.0 && t.trigger_fraction <= 1.0) {
            return bad("training.trigger_fraction", "0 < trigger_fraction ≤ 1");
        }
        if self.scan.points < 2 {
            return bad("scan.points", "points ≥ 2");
        }
        if self.seeds.is_empty() {
            return bad("seeds", "at least one seed");
        }
        Ok(())
    }

    /// Serialized form with every default filled in.
    pub fn echo(&self) -> String {
        serde_json::to_string_pretty(self).expect("config always serializes")
    }
}

/// Parses and validates a JSON config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}
