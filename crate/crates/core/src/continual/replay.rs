//! Fixed-size replay set with even per-task quotas.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::nncore::Batch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub sample: Vec<f64>,
    pub label: u8,
    pub task: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    /// Task ids in arrival order.
    tasks: Vec<usize>,
    entries: Vec<ReplayEntry>,
}

/// Slots per task: `capacity / k` each, the remainder going one apiece to the earliest tasks.
pub fn quotas(capacity: usize, tasks: usize) -> Vec<usize> {
    if tasks == 0 {
        return Vec::new();
    }
    let (q, rem) = (capacity / tasks, capacity % tasks);
    (0..tasks).map(|i| q + usize::from(i < rem)).collect()
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            tasks: Vec::new(),
            entries: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ReplayEntry] {
        &self.entries
    }

    pub fn tasks(&self) -> &[usize] {
        &self.tasks
    }

    pub fn count_for(&self, task: usize) -> usize {
        self.entries.iter().filter(|e| e.task == task).count()
    }

    /// Adds `task_id`'s training data and rebalances every task to its quota.
    ///
    /// Existing tasks are subsampled uniformly without replacement from what
    /// they still hold; the new task is sampled from `train` the same way.
    pub fn update<R: Rng + ?Sized>(&mut self, task_id: usize, train: &Batch, rng: &mut R) -> Result<()> {
        if self.tasks.contains(&task_id) {
            return Err(Error::contract(format!(
                "task {task_id} is already in the replay buffer"
            )));
        }
        if let Some(first) = self.entries.first() {
            if first.sample.len() != train.dim() {
                return Err(Error::contract("replay sample dimension changed between tasks"));
            }
        }
        self.tasks.push(task_id);
        let quota = quotas(self.capacity, self.tasks.len());
        let mut kept = Vec::with_capacity(self.capacity);
        for (t, q) in self.tasks.iter().zip(&quota) {
            let pool: Vec<ReplayEntry> = if *t == task_id {
                (0..train.len())
                    .map(|i| ReplayEntry {
                        sample: train.sample(i).to_vec(),
                        label: train.labels()[i],
                        task: task_id,
                    })
                    .collect()
            } else {
                self.entries.iter().filter(|e| e.task == *t).cloned().collect()
            };
            let take = (*q).min(pool.len());
            let mut idx = rand::seq::index::sample(rng, pool.len(), take).into_vec();
            idx.sort_unstable();
            kept.extend(idx.into_iter().map(|i| pool[i].clone()));
        }
        self.entries = kept;
        Ok(())
    }

    /// The buffer contents as a batch, or `None` when empty.
    pub fn as_batch(&self) -> Result<Option<Batch>> {
        let Some(first) = self.entries.first() else {
            return Ok(None);
        };
        let dim = first.sample.len();
        let mut data = Vec::with_capacity(self.entries.len() * dim);
        for e in &self.entries {
            data.extend_from_slice(&e.sample);
        }
        let inputs = Mat::from_vec(self.entries.len(), dim, data)?;
        Ok(Some(Batch::new(
            inputs,
            self.entries.iter().map(|e| e.label).collect(),
        )?))
    }
}

/// [`ReplayBuffer::update`] as a free function.
pub fn replay_update<R: Rng + ?Sized>(
    buffer: &mut ReplayBuffer,
    task_id: usize,
    train: &Batch,
    rng: &mut R,
) -> Result<()> {
    buffer.update(task_id, train, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn task(n: usize, offset: f64) -> Batch {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![offset + i as f64]).collect();
        Batch::from_rows(&rows, (0..n).map(|i| (i % 2) as u8).collect()).unwrap()
    }

    #[test]
    fn quota_split() {
        assert_eq!(quotas(500, 5), vec![100; 5]);
        assert_eq!(quotas(10, 3), vec![4, 3, 3]);
        assert_eq!(quotas(2, 3), vec![1, 1, 0]);
    }

    #[test]
    fn capacity_bound_single_task() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut b = ReplayBuffer::new(500);
        b.update(0, &task(600, 0.0), &mut rng).unwrap();
        assert_eq!(b.len(), 500);
        let mut seen: Vec<f64> = b.entries().iter().map(|e| e.sample[0]).collect();
        seen.dedup();
        assert_eq!(seen.len(), 500);
    }

    #[test]
    fn five_tasks_even_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut b = ReplayBuffer::new(500);
        for t in 0..5 {
            b.update(t, &task(300, 1000.0 * t as f64), &mut rng).unwrap();
            assert!(b.len() <= 500);
        }
        for t in 0..5 {
            assert_eq!(b.count_for(t), 100);
        }
        assert!(b.update(2, &task(10, 0.0), &mut rng).is_err());
    }
}
