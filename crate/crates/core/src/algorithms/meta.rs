use serde::{Deserialize, Serialize};

use super::config::MetaLossMode;
use super::Model;
use crate::error::{Error, Result};
use crate::nn::{sgd_step, LearningRate, ParamVector};
use crate::tasks::Example;

/// Learnable per-parameter learning rates.
///
/// `alpha` is stored raw and may go negative; it is clamped at zero only
/// where the weights are stepped, so a suppressed coordinate can recover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrState {
    pub alpha: ParamVector,
    pub alpha_init: f64,
    pub eta: f64,
}

impl LrState {
    pub fn new(num_params: usize, alpha_init: f64, eta: f64) -> Self {
        Self {
            alpha: ParamVector::filled(num_params, alpha_init),
            alpha_init,
            eta,
        }
    }

    /// `max(0, α)` elementwise.
    pub fn clamped(&self) -> ParamVector {
        self.alpha.map(|a| a.max(0.0))
    }
}

/// Inner-loop sub-batches (current task only) and the meta-set
/// `b ∪ Sample(R)`.
#[derive(Debug, Clone)]
pub struct MetaBatch<'a> {
    pub inner: Vec<Vec<&'a Example>>,
    pub meta: Vec<&'a Example>,
}

impl<'a> MetaBatch<'a> {
    /// Splits `batch` into `k` equal consecutive sub-batches and appends
    /// `replay` to form the meta-set. A short final batch yields fewer
    /// sub-batches of the same size.
    pub fn new(batch: &[&'a Example], replay: &[&'a Example], k: usize) -> Result<Self> {
        if batch.is_empty() || k == 0 {
            return Err(Error::InvalidArgument("meta-batch needs a non-empty batch and k >= 1".into()));
        }
        let size = batch.len().div_ceil(k);
        let inner = batch.chunks(size).map(|c| c.to_vec()).collect();
        let mut meta = batch.to_vec();
        meta.extend_from_slice(replay);
        Ok(Self { inner, meta })
    }

    pub fn k(&self) -> usize {
        self.inner.len()
    }
}

/// Result of `k` sequential SGD steps from `θ_0`.
#[derive(Debug, Clone)]
pub struct InnerTrajectory {
    pub start: ParamVector,
    /// `∇ℓ_t(θ_{k'})` for `k' = 0..k-1`.
    pub traj_grads: Vec<ParamVector>,
    /// `θ_1..θ_k`.
    pub per_step_params: Vec<ParamVector>,
}

impl InnerTrajectory {
    /// `θ_k`.
    pub fn final_params(&self) -> &ParamVector {
        self.per_step_params.last().unwrap_or(&self.start)
    }

    /// `Σ_{k'} traj_grads[k']`.
    pub fn traj_sum(&self) -> ParamVector {
        let mut s = ParamVector::zeros(self.start.len());
        for g in &self.traj_grads {
            s.axpy(1.0, g).expect("trajectory shapes agree");
        }
        s
    }
}

/// Runs one SGD step per sub-batch, starting from `theta0`.
pub fn inner_loop<M: Model + ?Sized>(
    model: &M,
    theta0: &ParamVector,
    lr: LearningRate<'_>,
    stream: &[Vec<&Example>],
) -> Result<InnerTrajectory> {
    let mut traj_grads = Vec::with_capacity(stream.len());
    let mut per_step_params = Vec::with_capacity(stream.len());
    let mut current = theta0.clone();
    for sub in stream {
        let (_, g) = model.loss_grad(&current, sub)?;
        if !g.is_finite() {
            return Err(Error::NonFinite("inner-loop gradient"));
        }
        let next = sgd_step(&current, &g, lr)?;
        traj_grads.push(g);
        per_step_params.push(next.clone());
        current = next;
    }
    Ok(InnerTrajectory {
        start: theta0.clone(),
        traj_grads,
        per_step_params,
    })
}

/// First-order meta-gradients of the meta-loss.
#[derive(Debug, Clone)]
pub struct MetaGradients {
    pub mode: MetaLossMode,
    /// Gradient applied to `θ_0`: the meta-loss gradient at each evaluation
    /// point, summed over the points.
    pub g_meta: ParamVector,
    /// Meta-loss gradient at each evaluation point (`θ_k` only, or `θ_1..θ_k`).
    pub point_grads: Vec<ParamVector>,
    pub meta_loss: f64,
}

/// Meta-loss gradients w.r.t. `θ_0` under the first-order approximation,
/// where `∂θ_k/∂θ_0` is taken as the identity.
pub fn meta_grad_theta<M: Model + ?Sized>(
    model: &M,
    traj: &InnerTrajectory,
    meta_set: &[&Example],
    mode: MetaLossMode,
) -> Result<MetaGradients> {
    if meta_set.is_empty() {
        return Err(Error::InvalidArgument("meta-set is empty".into()));
    }
    let points: Vec<&ParamVector> = match mode {
        MetaLossMode::LastStep => vec![traj.final_params()],
        MetaLossMode::AllSteps if traj.per_step_params.is_empty() => vec![&traj.start],
        MetaLossMode::AllSteps => traj.per_step_params.iter().collect(),
    };
    let mut point_grads = Vec::with_capacity(points.len());
    let mut loss = 0.0;
    for p in &points {
        let (l, g) = model.loss_grad(p, meta_set)?;
        loss += l;
        point_grads.push(g);
    }
    let g_meta = if point_grads.len() == 1 {
        point_grads[0].clone()
    } else {
        let mut acc = ParamVector::zeros(traj.start.len());
        for g in &point_grads {
            acc.axpy(1.0, g)?;
        }
        acc
    };
    Ok(MetaGradients {
        mode,
        g_meta,
        point_grads,
        meta_loss: loss / points.len() as f64,
    })
}

/// First-order learning-rate hypergradient for a meta-loss evaluated at
/// `θ_k`: `−g_meta ⊙ Σ_{k'} traj_grads[k']`.
///
/// Negative where the meta-gradient and the inner trajectory agree (the
/// learning rate grows), positive where they interfere.
pub fn meta_grad_alpha(g_meta: &ParamVector, traj_grads: &[ParamVector]) -> Result<ParamVector> {
    let mut sum = ParamVector::zeros(g_meta.len());
    for g in traj_grads {
        sum.axpy(1.0, g)?;
    }
    Ok(g_meta.mul(&sum)?.scale(-1.0))
}

/// Hypergradient matching the configured meta-loss. For all-steps, the
/// meta-loss at `θ_j` only depends on the learning rates through the first
/// `j` inner steps, so each evaluation point pairs with its own prefix sum of
/// trajectory gradients.
pub fn hypergradient(meta: &MetaGradients, traj_grads: &[ParamVector]) -> Result<ParamVector> {
    match meta.mode {
        MetaLossMode::LastStep => meta_grad_alpha(&meta.point_grads[0], traj_grads),
        MetaLossMode::AllSteps if traj_grads.is_empty() => Ok(ParamVector::zeros(meta.g_meta.len())),
        MetaLossMode::AllSteps => {
            if meta.point_grads.len() != traj_grads.len() {
                return Err(Error::shape("hypergradient points", traj_grads.len(), meta.point_grads.len()));
            }
            let n = meta.g_meta.len();
            let mut prefix = ParamVector::zeros(n);
            let mut out = ParamVector::zeros(n);
            for (g_point, g_traj) in meta.point_grads.iter().zip(traj_grads) {
                prefix.axpy(1.0, g_traj)?;
                for ((o, a), b) in out.as_mut_slice().iter_mut().zip(g_point.iter()).zip(prefix.iter()) {
                    *o -= a * b;
                }
            }
            Ok(out)
        }
    }
}
