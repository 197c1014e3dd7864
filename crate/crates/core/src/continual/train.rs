//! Minibatch Adam training for one task.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::augment::{AugmentationSpec, Representation};
use super::loss::{loss_total, LossParts};
use super::replay::ReplayBuffer;
use super::strategy::StrategyConfig;
use crate::curvature::CurvatureSnapshot;
use crate::error::{Error, Result};
use crate::nncore::{backward, evaluate, AdamState, Batch, Network, WeightVector};

/// One optimizer step; loss fields are the weighted components of the objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub task: usize,
    pub epoch: usize,
    pub step: usize,
    pub loss_cls: f64,
    pub loss_ac_extra: f64,
    pub loss_kfac: f64,
    pub loss_ewc: f64,
    /// Accuracy of the pre-step weights on the clean minibatch.
    pub acc: f64,
}

/// Settings shared by every task of a run.
#[derive(Debug, Clone, Copy)]
pub struct TrainOptions<'a> {
    pub batch_size: usize,
    pub augmentation: &'a AugmentationSpec,
    pub representation: Representation,
}

/// Runs `epochs` passes of shuffled minibatch Adam on `objective`, updating
/// `net` in place and appending one [`StepRecord`] per step to `log`.
#[allow(clippy::too_many_arguments)]
pub fn fit<R, F>(
    net: &mut Network,
    data: &Batch,
    epochs: usize,
    lr: f64,
    batch_size: usize,
    task: usize,
    rng: &mut R,
    log: &mut Vec<StepRecord>,
    mut objective: F,
) -> Result<()>
where
    R: Rng + ?Sized,
    F: FnMut(&Network, &Batch, &mut R) -> Result<(LossParts, WeightVector)>,
{
    if data.is_empty() {
        return Err(Error::contract(format!("task {task} has no training data")));
    }
    if batch_size == 0 {
        return Err(Error::config("training.batch_size: must satisfy batch_size ≥ 1"));
    }
    let mut theta = net.flatten();
    let mut adam = AdamState::new(theta.len());
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..epochs {
        order.shuffle(rng);
        for (step, chunk) in order.chunks(batch_size).enumerate() {
            let mb = data.select(chunk);
            let acc = evaluate(net, &mb)?;
            let (parts, grads) = objective(net, &mb, rng)?;
            let record = StepRecord {
                task,
                epoch: epoch + 1,
                step: step + 1,
                loss_cls: parts.cls,
                loss_ac_extra: parts.ac_extra,
                loss_kfac: parts.kfac,
                loss_ewc: parts.ewc,
                acc,
            };
            log.push(record);
            if !parts.total().is_finite() || !grads.all_finite() {
                return Err(Error::Diverged {
                    task,
                    epoch: epoch + 1,
                    step: step + 1,
                    detail: format!("loss {} with finite gradients: {}", parts.total(), grads.all_finite()),
                });
            }
            adam.step(&mut theta, &grads, lr)?;
            net.load(&theta)?;
        }
    }
    Ok(())
}

/// Plain BCE objective.
pub fn plain_objective<R: Rng + ?Sized>(
    net: &Network,
    batch: &Batch,
    _rng: &mut R,
) -> Result<(LossParts, WeightVector)> {
    let g = backward(net, batch)?;
    Ok((
        LossParts {
            cls: g.loss,
            ..Default::default()
        },
        g.grads,
    ))
}

/// Trains from `theta_init` on the task (plus the replay set when enabled)
/// with the strategy's objective for `strategy.epochs` epochs.
#[allow(clippy::too_many_arguments)]
pub fn train_task<R: Rng + ?Sized>(
    template: &Network,
    theta_init: &WeightVector,
    task: usize,
    train: &Batch,
    buffer: Option<&ReplayBuffer>,
    snapshots: &[CurvatureSnapshot],
    strategy: &StrategyConfig,
    opts: TrainOptions<'_>,
    rng: &mut R,
    log: &mut Vec<StepRecord>,
) -> Result<WeightVector> {
    strategy.validate()?;
    let data = match buffer.filter(|_| strategy.use_replay) {
        Some(b) => match b.as_batch()? {
            Some(replay) => Batch::concat(&[train, &replay])?,
            None => train.clone(),
        },
        None => train.clone(),
    };
    let mut net = template.with_weights(theta_init)?;
    fit(
        &mut net,
        &data,
        strategy.epochs,
        strategy.lr,
        opts.batch_size,
        task,
        rng,
        log,
        |n, mb, r| loss_total(n, mb, opts.augmentation, opts.representation, snapshots, strategy, r),
    )?;
    Ok(net.flatten())
}
