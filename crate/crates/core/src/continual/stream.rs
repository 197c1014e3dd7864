//! Task-stream orchestration: offline fit, triggered continual updates,
//! running-average merging and accuracy-matrix bookkeeping.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::TaskDataset;
use super::replay::ReplayBuffer;
use super::train::{fit, plain_objective, train_task, StepRecord, TrainOptions};
use super::SnapshotMode;
use crate::config::{make_stream, ExperimentConfig};
use crate::connectivity::{forgetting_record, merge_running, scan, uniform_grid, ForgettingRecord, PathScan};
use crate::curvature::{collect_factors, fisher_diag, CurvatureSnapshot};
use crate::error::{Error, Result};
use crate::metrics::{AccuracyMatrix, RunEvent, RunReport, RunStatus, Timing};
use crate::nncore::{evaluate, Batch, Network};

const STREAM_INIT: u64 = 1;
const STREAM_OFFLINE: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_REPLAY: u64 = 4;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stage 1: fresh network, LoRA adapters per the mask, plain BCE for
/// `offline_epochs`, then adapters merged into the base weights.
pub fn offline_fit(
    cfg: &ExperimentConfig,
    seed: u64,
    data: &Batch,
    task: usize,
    log: &mut Vec<StepRecord>,
) -> Result<Network> {
    let spec = &cfg.network;
    let mut init = rng_for(seed, STREAM_INIT);
    let mut net = Network::random(cfg.input_dim(), &spec.hidden, spec.activation, spec.bias, &mut init)?;
    if spec.lora_mask.iter().any(|m| *m) {
        net.attach_lora(&spec.lora_mask, spec.lora_rank, &mut init)?;
    }
    let mut rng = rng_for(seed, STREAM_OFFLINE);
    let t = &cfg.training;
    fit(
        &mut net,
        data,
        t.offline_epochs,
        t.offline_lr,
        t.batch_size,
        task,
        &mut rng,
        log,
        plain_objective,
    )?;
    net.merge_adapters()
}

#[derive(Debug)]
struct Progress {
    matrix: AccuracyMatrix,
    events: Vec<RunEvent>,
    scans: Vec<PathScan>,
    forgetting: Vec<ForgettingRecord>,
    steps: Vec<StepRecord>,
    per_task_seconds: Vec<f64>,
}

fn fill_row(matrix: &mut AccuracyMatrix, row: usize, net: &Network, tasks: &[TaskDataset]) -> Result<()> {
    let accs = crate::parallel::map_ordered(&tasks[..=row], |task| evaluate(net, &task.test));
    for (j, acc) in accs.into_iter().enumerate() {
        matrix.record(row, j, acc?)?;
    }
    Ok(())
}

fn snapshot_for(cfg: &ExperimentConfig, net: &Network, data: &Batch) -> Result<CurvatureSnapshot> {
    let mut snap = collect_factors(net, data, cfg.training.damping)?;
    if cfg.strategy.use_ewc {
        snap.fisher_diag = Some(fisher_diag(net, data)?);
    }
    Ok(snap)
}

fn run_continual(cfg: &ExperimentConfig, seed: u64, tasks: &[TaskDataset], p: &mut Progress) -> Result<()> {
    let strategy = &cfg.strategy;
    let clock = Instant::now();
    let template = offline_fit(cfg, seed, &tasks[0].train, 1, &mut p.steps)?;
    let mut theta = template.flatten();
    fill_row(&mut p.matrix, 0, &template, tasks)?;
    p.events.push(RunEvent {
        task: 1,
        pre_accuracy: None,
        trained: true,
        merged: false,
        tasks_seen: 1,
    });

    let first = snapshot_for(cfg, &template, &tasks[0].train)?;
    let mut latest = (0usize, first.clone());
    let mut snapshots = vec![first];
    let mut buffer = ReplayBuffer::new(strategy.replay_capacity);
    let mut train_rng = rng_for(seed, STREAM_TRAIN);
    let mut replay_rng = rng_for(seed, STREAM_REPLAY);
    if strategy.use_replay {
        buffer.update(1, &tasks[0].train, &mut replay_rng)?;
    }
    p.per_task_seconds.push(clock.elapsed().as_secs_f64());

    let grid = uniform_grid(cfg.scan.points)?;
    let opts = TrainOptions {
        batch_size: cfg.training.batch_size,
        augmentation: &cfg.augmentation,
        representation: cfg.representation(),
    };
    let mut seen = 1;
    for (t, task) in tasks.iter().enumerate().skip(1) {
        let clock = Instant::now();
        let net = template.with_weights(&theta)?;
        let pre = evaluate(&net, &task.trigger_slice(cfg.training.trigger_fraction))?;
        let trained = pre < strategy.trigger_threshold;
        let mut merged = false;
        if trained {
            seen += 1;
            let theta_t = train_task(
                &template,
                &theta,
                t + 1,
                &task.train,
                Some(&buffer),
                &snapshots,
                strategy,
                opts,
                &mut train_rng,
                &mut p.steps,
            )?;
            if cfg.scan.enabled {
                let previous: Vec<&Batch> = tasks[..t].iter().map(|d| &d.test).collect();
                p.scans
                    .push(scan(&template, &theta, &theta_t, &grid, &previous, &task.test, t + 1)?);
            }
            let next = if strategy.use_linear_merge {
                merged = true;
                merge_running(&theta, &theta_t, seen)?
            } else {
                theta_t
            };
            let (snap_task, snap) = &latest;
            p.forgetting.push(forgetting_record(
                snap_task + 1,
                &template,
                &theta,
                &next,
                &tasks[*snap_task].train,
                snap,
            )?);
            theta = next;
            let fresh = snapshot_for(cfg, &template.with_weights(&theta)?, &task.train)?;
            latest = (t, fresh.clone());
            match strategy.snapshot_mode {
                SnapshotMode::Replace => snapshots = vec![fresh],
                SnapshotMode::Accumulate => snapshots.push(fresh),
            }
        }
        if strategy.use_replay {
            buffer.update(t + 1, &task.train, &mut replay_rng)?;
        }
        fill_row(&mut p.matrix, t, &template.with_weights(&theta)?, tasks)?;
        p.events.push(RunEvent {
            task: t + 1,
            pre_accuracy: Some(pre),
            trained,
            merged,
            tasks_seen: seen,
        });
        p.per_task_seconds.push(clock.elapsed().as_secs_f64());
    }
    Ok(())
}

fn run_joint(cfg: &ExperimentConfig, seed: u64, tasks: &[TaskDataset], p: &mut Progress) -> Result<()> {
    for t in 0..tasks.len() {
        let clock = Instant::now();
        let parts: Vec<&Batch> = tasks[..=t].iter().map(|d| &d.train).collect();
        let net = offline_fit(cfg, seed, &Batch::concat(&parts)?, t + 1, &mut p.steps)?;
        fill_row(&mut p.matrix, t, &net, tasks)?;
        p.events.push(RunEvent {
            task: t + 1,
            pre_accuracy: None,
            trained: true,
            merged: false,
            tasks_seen: t + 1,
        });
        p.per_task_seconds.push(clock.elapsed().as_secs_f64());
    }
    Ok(())
}

/// Runs the configured strategy over `tasks`. Failures after validation are
/// reported through [`RunStatus::Failed`] with the partial matrix kept.
pub fn run_stream_on(cfg: &ExperimentConfig, seed: u64, tasks: &[TaskDataset]) -> Result<RunReport> {
    cfg.validate()?;
    if tasks.is_empty() {
        return Err(Error::contract("run_stream needs at least one task"));
    }
    let clock = Instant::now();
    let mut p = Progress {
        matrix: AccuracyMatrix::new(tasks.len()),
        events: Vec::new(),
        scans: Vec::new(),
        forgetting: Vec::new(),
        steps: Vec::new(),
        per_task_seconds: Vec::new(),
    };
    let outcome = if cfg.strategy.joint_retrain {
        run_joint(cfg, seed, tasks, &mut p)
    } else {
        run_continual(cfg, seed, tasks, &mut p)
    };
    let status = match outcome {
        Ok(()) => RunStatus::Completed,
        Err(e) => RunStatus::Failed { error: e.to_string() },
    };
    Ok(RunReport {
        config: cfg.clone(),
        seed,
        strategy: cfg.strategy.tag(),
        status,
        tasks: RunReport::summarize(&p.matrix)?,
        matrix: p.matrix,
        events: p.events,
        scans: p.scans,
        forgetting: p.forgetting,
        timing: Timing {
            total_seconds: clock.elapsed().as_secs_f64(),
            per_task_seconds: p.per_task_seconds,
        },
        steps: p.steps,
    })
}

/// Synthesizes the configured stream for `seed` and runs it.
pub fn run_stream(cfg: &ExperimentConfig, seed: u64) -> Result<RunReport> {
    let tasks = make_stream(cfg, seed)?;
    run_stream_on(cfg, seed, &tasks)
}
