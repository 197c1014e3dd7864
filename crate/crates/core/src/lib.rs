//! Continual-learning engine for small dense detectors.
//!
//! The crate trains a binary real/fake detector over a stream of drifting
//! tasks in three stages: a LoRA-adapted offline fit, curvature-regularized
//! continual updates with an augmentation chain, and running-average merging
//! along the linear path between successive solutions. It also instruments
//! the quantities used to reason about forgetting: Kronecker-factored
//! curvature, a second-order forgetting estimate, a multitask loss bound and
//! the average-accuracy / average-forgetting metrics.
//!
//! Module map:
//!
//! - [`nncore`]: network, backprop, BCE, Adam, LoRA.
//! - [`curvature`]: K-FAC factors and penalty, Fisher diagonal, finite-difference Hessians, power iteration.
//! - [`continual`]: augmentation chain, combined loss, replay, task training and stream orchestration.
//! - [`connectivity`]: interpolation, running-average merge, λ-scans, forgetting and bound checks.
//! - [`metrics`]: accuracy matrix, AA/AF, report emission.
//! - [`config`]: experiment configuration, synthetic drift streams, dataset files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod connectivity;
pub mod container;
pub mod continual;
pub mod curvature;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod nncore;
pub(crate) mod parallel;

pub use error::{Error, Result};
