use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Example, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Every training example is seen once, in order; each batch is repeated
    /// for `glances` consecutive updates.
    SinglePass,
    /// `epochs` shuffled passes over each task's training data.
    MultiPass,
}

#[derive(Debug, Clone)]
pub struct TaskStream {
    pub tasks: Vec<Task>,
    pub protocol: Protocol,
    pub batch_size: usize,
    pub glances: usize,
    pub epochs: usize,
    pub num_classes: usize,
    pub input_dim: usize,
}

impl TaskStream {
    pub fn new(
        tasks: Vec<Task>,
        protocol: Protocol,
        batch_size: usize,
        glances: usize,
        epochs: usize,
        num_classes: usize,
    ) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::InvalidArgument("task stream has no tasks".into()));
        }
        if batch_size == 0 || glances == 0 || epochs == 0 {
            return Err(Error::InvalidArgument(format!(
                "batch_size, glances and epochs must be >= 1 (got {batch_size}, {glances}, {epochs})"
            )));
        }
        match protocol {
            Protocol::SinglePass if epochs != 1 => {
                return Err(Error::InvalidArgument("single-pass streams use exactly one epoch".into()))
            }
            Protocol::MultiPass if glances != 1 => {
                return Err(Error::InvalidArgument("multi-pass streams use one glance per batch".into()))
            }
            _ => {}
        }
        let input_dim = tasks[0].train.first().map_or(0, |e| e.x.len());
        for task in &tasks {
            for e in task.train.iter().chain(&task.test) {
                if e.y >= num_classes {
                    return Err(Error::LabelOutOfRange {
                        label: e.y,
                        classes: num_classes,
                    });
                }
                if e.x.len() != input_dim {
                    return Err(Error::shape("task stream input", input_dim, e.x.len()));
                }
            }
        }
        Ok(Self {
            tasks,
            protocol,
            batch_size,
            glances,
            epochs,
            num_classes,
            input_dim,
        })
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }
}

/// The sequence of training batches presented for task `task_index`.
///
/// Single-pass: consecutive chunks in stored order, each repeated `glances`
/// times. Multi-pass: `epochs` independently shuffled passes; `rng` is only
/// consumed in this mode.
pub fn stream_batches<'a, R: Rng + ?Sized>(
    ts: &'a TaskStream,
    task_index: usize,
    rng: &mut R,
) -> Result<Vec<Vec<&'a Example>>> {
    let task = ts.tasks.get(task_index).ok_or_else(|| {
        Error::InvalidArgument(format!("task index {task_index} out of range ({} tasks)", ts.num_tasks()))
    })?;
    let mut out = Vec::new();
    match ts.protocol {
        Protocol::SinglePass => {
            for chunk in task.train.chunks(ts.batch_size) {
                let batch: Vec<&Example> = chunk.iter().collect();
                for _ in 0..ts.glances {
                    out.push(batch.clone());
                }
            }
        }
        Protocol::MultiPass => {
            let mut order: Vec<&Example> = task.train.iter().collect();
            for _ in 0..ts.epochs {
                order.shuffle(rng);
                out.extend(order.chunks(ts.batch_size).map(|c| c.to_vec()));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::Transform;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256StarStar;

    fn task(n: usize) -> Task {
        Task {
            id: 0,
            train: (0..n)
                .map(|i| Example {
                    x: vec![i as f64],
                    y: i % 2,
                    task_id: 0,
                })
                .collect(),
            test: vec![],
            transform: Transform::Rotation { degrees: 0.0 },
        }
    }

    #[test]
    fn single_pass_repeats_each_batch_for_every_glance() {
        let ts = TaskStream::new(vec![task(20)], Protocol::SinglePass, 10, 5, 1, 2).unwrap();
        let mut r = Xoshiro256StarStar::seed_from_u64(0);
        let batches = stream_batches(&ts, 0, &mut r).unwrap();
        assert_eq!(batches.len(), 10);
        for g in 1..5 {
            assert_eq!(batches[g], batches[0]);
            assert_eq!(batches[5 + g], batches[5]);
        }
        assert_ne!(batches[0], batches[5]);
        assert_eq!(batches[0][0].x, vec![0.0]);
    }

    #[test]
    fn multi_pass_counts_and_covers() {
        let ts = TaskStream::new(vec![task(20)], Protocol::MultiPass, 10, 1, 10, 2).unwrap();
        let mut r = Xoshiro256StarStar::seed_from_u64(0);
        let batches = stream_batches(&ts, 0, &mut r).unwrap();
        assert_eq!(batches.len(), 20);
        let mut first_epoch: Vec<f64> = batches[..2].iter().flatten().map(|e| e.x[0]).collect();
        first_epoch.sort_by(f64::total_cmp);
        assert_eq!(first_epoch, (0..20).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn invalid_configurations() {
        assert!(TaskStream::new(vec![task(4)], Protocol::SinglePass, 0, 1, 1, 2).is_err());
        assert!(TaskStream::new(vec![task(4)], Protocol::SinglePass, 2, 1, 3, 2).is_err());
        assert!(TaskStream::new(vec![task(4)], Protocol::MultiPass, 2, 2, 3, 2).is_err());
        assert!(matches!(
            TaskStream::new(vec![task(4)], Protocol::SinglePass, 2, 1, 1, 1),
            Err(Error::LabelOutOfRange { .. })
        ));
        let ts = TaskStream::new(vec![task(4)], Protocol::SinglePass, 2, 1, 1, 2).unwrap();
        let mut r = Xoshiro256StarStar::seed_from_u64(0);
        assert!(stream_batches(&ts, 1, &mut r).is_err());
    }
}
