//! Retained accuracy, backward transfer and gradient-alignment statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::algorithms::{Algorithm, Model, TrainerConfig};
use crate::error::{Error, Result};
use crate::nn::ParamVector;
use crate::tasks::Example;

/// How a training run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    /// Parameters went non-finite; the accuracy rows stop at the last
    /// finished task.
    Diverged { message: String },
}

/// Mean accuracy over seen tasks at a point inside training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub update: u64,
    pub task: usize,
    pub mean_acc: f64,
}

/// Mean pairwise old-task gradient dot product measured when `task` starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryAlignment {
    pub task: usize,
    pub value: Option<f64>,
}

/// Everything one `(algorithm, seed)` run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub num_tasks: usize,
    /// `acc[i][j]`: accuracy on task `j` after finishing task `i`, `j <= i`.
    pub acc: Vec<Vec<f64>>,
    pub wall_time_s: f64,
    pub config: TrainerConfig,
    pub updates: u64,
    /// Mean replay/incoming gradient cosine over updates after the first
    /// task, and how many updates contributed to it.
    pub alignment: Option<f64>,
    pub alignment_samples: u64,
    pub old_task_alignment: Vec<BoundaryAlignment>,
    pub curve: Vec<CurvePoint>,
    pub status: RunStatus,
}

impl RunRecord {
    pub fn is_complete(&self) -> bool {
        self.status == RunStatus::Completed
            && self.acc.len() == self.num_tasks
            && self.acc.iter().enumerate().all(|(i, row)| row.len() == i + 1)
    }

    fn final_row(&self) -> Result<&[f64]> {
        if !self.is_complete() || self.num_tasks == 0 {
            return Err(Error::IncompleteRecord(format!(
                "{} rows of {} tasks ({:?})",
                self.acc.len(),
                self.num_tasks,
                self.status
            )));
        }
        Ok(&self.acc[self.num_tasks - 1])
    }
}

/// Mean final accuracy over all tasks, in percent.
pub fn retained_accuracy(rec: &RunRecord) -> Result<f64> {
    let last = rec.final_row()?;
    Ok(100.0 * last.iter().sum::<f64>() / last.len() as f64)
}

/// Mean change of each task's accuracy between when it was learnt and the
/// end of training, in percentage points. The last task is excluded.
pub fn bti(rec: &RunRecord) -> Result<f64> {
    let last = rec.final_row()?;
    let t = last.len();
    if t < 2 {
        return Err(Error::InvalidArgument(format!("BTI needs at least 2 tasks, got {t}")));
    }
    let total: f64 = (0..t - 1).map(|j| last[j] - rec.acc[j][j]).sum();
    Ok(100.0 * total / (t - 1) as f64)
}

/// Cosine similarity; `None` when either vector has zero norm.
pub fn cosine(a: &ParamVector, b: &ParamVector) -> Result<Option<f64>> {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Ok(None);
    }
    Ok(Some((a.dot(b)? / (na * nb)).clamp(-1.0, 1.0)))
}

/// Cosine between the mean gradients of a replay batch and an incoming batch.
pub fn grad_alignment<M: Model + ?Sized>(
    model: &M,
    params: &ParamVector,
    replay_batch: &[&Example],
    new_batch: &[&Example],
) -> Result<Option<f64>> {
    if replay_batch.is_empty() || new_batch.is_empty() {
        return Err(Error::InvalidArgument("grad_alignment needs two non-empty batches".into()));
    }
    let (_, g_replay) = model.loss_grad(params, replay_batch)?;
    let (_, g_new) = model.loss_grad(params, new_batch)?;
    cosine(&g_replay, &g_new)
}

/// Mean over unordered pairs of old tasks of the dot product between their
/// mean gradients, using the buffer items of tasks other than
/// `current_task_id`. `None` with fewer than two old tasks in the buffer.
pub fn old_task_alignment<M: Model + ?Sized>(
    model: &M,
    params: &ParamVector,
    buffer: &[Example],
    current_task_id: usize,
) -> Result<Option<f64>> {
    let mut groups: BTreeMap<usize, Vec<&Example>> = BTreeMap::new();
    for e in buffer.iter().filter(|e| e.task_id != current_task_id) {
        groups.entry(e.task_id).or_default().push(e);
    }
    if groups.len() < 2 {
        return Ok(None);
    }
    let grads = groups
        .values()
        .map(|items| model.loss_grad(params, items).map(|(_, g)| g))
        .collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..grads.len() {
        for j in i + 1..grads.len() {
            total += grads[i].dot(&grads[j])?;
            pairs += 1;
        }
    }
    Ok(Some(total / pairs as f64))
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, std))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn record(acc: Vec<Vec<f64>>) -> RunRecord {
        RunRecord {
            algorithm: Algorithm::Online,
            seed: 0,
            num_tasks: acc.len(),
            acc,
            wall_time_s: 0.0,
            config: TrainerConfig::new(Algorithm::Online).with_lr(0.1),
            updates: 0,
            alignment: None,
            alignment_samples: 0,
            old_task_alignment: vec![],
            curve: vec![],
            status: RunStatus::Completed,
        }
    }

    fn lower_triangle(t: usize, fill: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
        (0..t).map(|i| (0..=i).map(|j| fill(i, j)).collect()).collect()
    }

    #[test]
    fn arithmetic_cases() {
        assert_eq!(retained_accuracy(&record(lower_triangle(3, |_, _| 1.0))).unwrap(), 100.0);
        let r = record(vec![vec![0.9], vec![0.5, 0.7]]);
        assert!((retained_accuracy(&r).unwrap() - 60.0).abs() < 1e-12);
        let r = record(vec![vec![0.9], vec![0.8, 0.95]]);
        assert!((bti(&r).unwrap() + 10.0).abs() < 1e-12);
        let r = record(lower_triangle(4, |_, j| 0.5 + 0.1 * j as f64));
        assert_eq!(bti(&r).unwrap(), 0.0);
    }

    #[test]
    fn incomplete_and_single_task_errors() {
        let mut r = record(vec![vec![0.9]]);
        assert!(retained_accuracy(&r).is_ok());
        assert!(bti(&r).is_err());
        r.num_tasks = 2;
        assert!(matches!(retained_accuracy(&r), Err(Error::IncompleteRecord(_))));
        let mut r = record(vec![vec![0.9], vec![0.5, 0.7]]);
        r.status = RunStatus::Diverged { message: "nan".into() };
        assert!(bti(&r).is_err());
    }

    #[test]
    fn cosine_cases() {
        let a = ParamVector::from_vec(vec![1.0, 2.0, 0.0]).unwrap();
        let b = ParamVector::from_vec(vec![-2.0, 1.0, 5.0]).unwrap();
        assert!((cosine(&a, &a).unwrap().unwrap() - 1.0).abs() < 1e-15);
        assert!(cosine(&a, &b).unwrap().unwrap().abs() < 1e-10);
        assert_eq!(cosine(&a, &ParamVector::zeros(3)).unwrap(), None);
    }

    #[test]
    fn mean_std_sample_convention() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
        assert_eq!(mean_std(&[4.0]), Some((4.0, 0.0)));
        assert_eq!(mean_std(&[]), None);
    }

    proptest! {
        // Relabeling tasks permutes the final row; RA only depends on its mean.
        #[test]
        fn ra_is_permutation_invariant(row in prop::collection::vec(0.0f64..=1.0, 2..8), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let t = row.len();
            let mut acc = lower_triangle(t, |_, _| 0.5);
            acc[t - 1] = row.clone();
            let mut shuffled = row;
            shuffled.shuffle(&mut rand_xoshiro::Xoshiro256StarStar::seed_from_u64(seed));
            let mut acc2 = acc.clone();
            acc2[t - 1] = shuffled;
            let a = retained_accuracy(&record(acc)).unwrap();
            let b = retained_accuracy(&record(acc2)).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn cosine_scale_invariant(
            v in prop::collection::vec(-5.0f64..5.0, 1..20),
            w in prop::collection::vec(-5.0f64..5.0, 1..20),
            s in 1e-3f64..1e3,
        ) {
            let n = v.len().min(w.len());
            let a = ParamVector::from_vec(v[..n].to_vec()).unwrap();
            let b = ParamVector::from_vec(w[..n].to_vec()).unwrap();
            let base = cosine(&a, &b).unwrap();
            let scaled = cosine(&a.scale(s), &b).unwrap();
            match (base, scaled) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-9),
                (x, y) => prop_assert_eq!(x.is_none(), y.is_none()),
            }
        }
    }
}
