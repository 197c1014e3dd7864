//! Continual-learning engine: augmentation chain, combined loss, replay,
//! per-task training and stream orchestration.

mod augment;
mod dataset;
mod loss;
mod replay;
mod strategy;
mod stream;
mod train;

pub use augment::{augment_batch, augment_chain, AugmentationSpec, PoolOp, Representation};
pub use dataset::{read_clds, read_dataset_csv, write_clds, write_dataset_csv, TaskDataset};
pub use loss::{ewc_penalty, ewc_penalty_grad, loss_ac, loss_ac_with_grad, loss_total, AcLoss, LossParts};
pub use replay::{quotas, replay_update, ReplayBuffer, ReplayEntry};
pub use strategy::{SnapshotMode, StrategyConfig};
pub use stream::{offline_fit, run_stream, run_stream_on};
pub use train::{fit, plain_objective, train_task, StepRecord, TrainOptions};
