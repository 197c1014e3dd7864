//! Strategy toggles and their hyperparameters.

use serde::{Deserialize, Serialize};

use crate::curvature::PenaltyForm;
use crate::error::{Error, Result};

/// How curvature snapshots evolve across tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotMode {
    /// Keep only the snapshot taken after the latest task.
    #[default]
    Replace,
    /// Penalize against every snapshot taken so far.
    Accumulate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyConfig {
    pub use_kfac: bool,
    pub use_ac: bool,
    pub use_linear_merge: bool,
    pub use_replay: bool,
    pub use_ewc: bool,
    pub joint_retrain: bool,
    pub sequential: bool,
    /// Weight of the augmented terms in the chain loss.
    pub lambda_ac: f64,
    /// Weight of the K-FAC penalty.
    pub gamma: f64,
    pub ewc_strength: f64,
    pub trigger_threshold: f64,
    pub epochs: usize,
    pub lr: f64,
    pub replay_capacity: usize,
    pub snapshot_mode: SnapshotMode,
    pub penalty_form: PenaltyForm,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            use_kfac: true,
            use_ac: true,
            use_linear_merge: true,
            use_replay: true,
            use_ewc: false,
            joint_retrain: false,
            sequential: false,
            lambda_ac: 0.2,
            gamma: 0.5,
            ewc_strength: 1.0,
            trigger_threshold: 0.90,
            epochs: 5,
            lr: 1e-4,
            replay_capacity: 500,
            snapshot_mode: SnapshotMode::Replace,
            penalty_form: PenaltyForm::Hessian,
        }
    }
}

impl StrategyConfig {
    fn flags_off(&self) -> Self {
        Self {
            use_kfac: false,
            use_ac: false,
            use_linear_merge: false,
            use_replay: false,
            use_ewc: false,
            joint_retrain: false,
            sequential: false,
            ..self.clone()
        }
    }

    /// K-FAC + AC + Linear + Replay.
    pub fn full(&self) -> Self {
        Self {
            use_kfac: true,
            use_ac: true,
            use_linear_merge: true,
            use_replay: true,
            ..self.flags_off()
        }
    }

    pub fn sequential(&self) -> Self {
        Self {
            sequential: true,
            ..self.flags_off()
        }
    }

    pub fn joint(&self) -> Self {
        Self {
            joint_retrain: true,
            ..self.flags_off()
        }
    }

    /// A regularized strategy with the given components.
    pub fn with_flags(&self, kfac: bool, ac: bool, linear: bool, replay: bool, ewc: bool) -> Self {
        Self {
            use_kfac: kfac,
            use_ac: ac,
            use_linear_merge: linear,
            use_replay: replay,
            use_ewc: ewc,
            ..self.flags_off()
        }
    }

    fn any_component(&self) -> bool {
        self.use_kfac || self.use_ac || self.use_linear_merge || self.use_replay || self.use_ewc
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, rule: &str| Err(Error::config(format!("strategy.{key}: must satisfy {rule}")));
        if self.sequential && self.joint_retrain {
            return bad("sequential", "not both sequential and joint_retrain");
        }
        if (self.sequential || self.joint_retrain) && self.any_component() {
            return bad(
                if self.sequential { "sequential" } else { "joint_retrain" },
                "all use_* flags false when selected",
            );
        }
        if !self.sequential && !self.joint_retrain && !self.any_component() {
            return bad("use_kfac", "at least one use_* flag true for a regularized strategy");
        }
        if !(self.lambda_ac >= 0.0) || !self.lambda_ac.is_finite() {
            return bad("lambda_ac", "lambda_ac ≥ 0");
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return bad("gamma", "gamma ≥ 0");
        }
        if !(self.ewc_strength >= 0.0) || !self.ewc_strength.is_finite() {
            return bad("ewc_strength", "ewc_strength ≥ 0");
        }
        if !(self.trigger_threshold > 0.0 && self.trigger_threshold < 1.0) {
            return bad("trigger_threshold", "0 < trigger_threshold < 1");
        }
        if self.epochs == 0 {
            return bad("epochs", "epochs ≥ 1");
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return bad("lr", "lr ≥ 0");
        }
        if self.use_replay && self.replay_capacity == 0 {
            return bad("replay_capacity", "replay_capacity ≥ 1 when use_replay");
        }
        Ok(())
    }

    /// Short label such as `sequential`, `joint` or `kfac+ac+linear+replay`.
    pub fn tag(&self) -> String {
        if self.sequential {
            return "sequential".into();
        }
        if self.joint_retrain {
            return "joint".into();
        }
        let parts = [
            (self.use_kfac, "kfac"),
            (self.use_ewc, "ewc"),
            (self.use_ac, "ac"),
            (self.use_linear_merge, "linear"),
            (self.use_replay, "replay"),
        ];
        parts
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, n)| *n)
            .collect::<Vec<_>>()
            .join("+")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_full_strategy() {
        let s = StrategyConfig::default();
        s.validate().unwrap();
        assert_eq!(s.tag(), "kfac+ac+linear+replay");
        assert_eq!(s, s.full());
    }

    #[test]
    fn exclusive_modes() {
        let d = StrategyConfig::default();
        d.sequential().validate().unwrap();
        d.joint().validate().unwrap();
        let mut both = d.sequential();
        both.joint_retrain = true;
        assert!(both.validate().is_err());
        let mut mixed = d.sequential();
        mixed.use_kfac = true;
        assert!(mixed.validate().is_err());
        assert!(d.with_flags(false, false, false, false, false).validate().is_err());
    }

    #[test]
    fn ranges() {
        let mut s = StrategyConfig {
            gamma: -1.0,
            ..Default::default()
        };
        let msg = s.validate().unwrap_err().to_string();
        assert!(msg.contains("gamma ≥ 0"), "{msg}");
        s.gamma = 0.5;
        s.trigger_threshold = 1.0;
        assert!(s.validate().is_err());
    }
}
