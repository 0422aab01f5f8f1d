//! One update step of each trainer. Every function is pure: it returns the
//! new weights (and learning rates) and leaves its inputs untouched.

use super::config::TrainerConfig;
use super::meta::{hypergradient, inner_loop, meta_grad_theta, InnerTrajectory, LrState, MetaBatch, MetaGradients};
use super::Model;
use crate::error::{Error, Result};
use crate::nn::{clip_grad_norm, sgd_step, LearningRate, ParamVector};
use crate::tasks::Example;

/// Plain SGD on the incoming batch.
pub fn online_update<M: Model + ?Sized>(
    model: &M,
    theta: &ParamVector,
    batch: &[&Example],
    cfg: &TrainerConfig,
) -> Result<ParamVector> {
    let (_, g) = model.loss_grad(theta, batch)?;
    sgd_step(theta, &clip_grad_norm(&g, cfg.clip_norm), LearningRate::Scalar(cfg.lr_value()))
}

/// SGD on the mean loss over `b ∪ Sample(R)`.
pub fn er_update<M: Model + ?Sized>(
    model: &M,
    theta: &ParamVector,
    meta_set: &[&Example],
    cfg: &TrainerConfig,
) -> Result<ParamVector> {
    online_update(model, theta, meta_set, cfg)
}

#[derive(Debug, Clone)]
pub struct AgemOutcome {
    pub params: ParamVector,
    /// Gradient actually applied, before clipping.
    pub applied: ParamVector,
    pub projected: bool,
}

/// A-GEM: when the batch gradient `g` conflicts with the replay gradient
/// `g_ref` (`g·g_ref < 0`), step along `g − (g·g_ref / g_ref·g_ref) g_ref`.
pub fn agem_update<M: Model + ?Sized>(
    model: &M,
    theta: &ParamVector,
    batch: &[&Example],
    replay: &[&Example],
    cfg: &TrainerConfig,
) -> Result<AgemOutcome> {
    let (_, g) = model.loss_grad(theta, batch)?;
    let mut applied = g;
    let mut projected = false;
    if !replay.is_empty() {
        let (_, g_ref) = model.loss_grad(theta, replay)?;
        let ref_sq = g_ref.dot(&g_ref)?;
        let d = applied.dot(&g_ref)?;
        if d < 0.0 && ref_sq > 0.0 {
            applied.axpy(-d / ref_sq, &g_ref)?;
            projected = true;
        }
    }
    let params = sgd_step(
        theta,
        &clip_grad_norm(&applied, cfg.clip_norm),
        LearningRate::Scalar(cfg.lr_value()),
    )?;
    Ok(AgemOutcome {
        params,
        applied,
        projected,
    })
}

fn unroll<M: Model + ?Sized>(
    model: &M,
    theta: &ParamVector,
    inner_lr: LearningRate<'_>,
    mb: &MetaBatch<'_>,
    cfg: &TrainerConfig,
) -> Result<(InnerTrajectory, MetaGradients)> {
    let traj = inner_loop(model, theta, inner_lr, &mb.inner)?;
    let meta = meta_grad_theta(model, &traj, &mb.meta, cfg.meta_loss)?;
    Ok((traj, meta))
}

fn inner_rates(lr: &LrState, cfg: &TrainerConfig) -> ParamVector {
    if cfg.clip_inner_alpha {
        lr.clamped()
    } else {
        lr.alpha.clone()
    }
}

/// `α − η · clip(g_α)`.
fn step_alpha(lr: &LrState, g_alpha: &ParamVector, cfg: &TrainerConfig) -> Result<LrState> {
    let alpha = sgd_step(&lr.alpha, &clip_grad_norm(g_alpha, cfg.clip_norm), LearningRate::Scalar(lr.eta))?;
    Ok(LrState { alpha, ..lr.clone() })
}

fn check_lr(lr: &LrState, theta: &ParamVector) -> Result<()> {
    if lr.alpha.len() != theta.len() {
        return Err(Error::shape("learning-rate vector", theta.len(), lr.alpha.len()));
    }
    Ok(())
}

/// C-MAML: inner loop with scalar `α`, outer step `θ_0 − β · clip(g_meta)`.
pub fn c_maml_update<M: Model + ?Sized>(
    model: &M,
    theta: &ParamVector,
    mb: &MetaBatch<'_>,
    cfg: &TrainerConfig,
) -> Result<ParamVector> {
    let (_, meta) = unroll(model, theta, LearningRate::Scalar(cfg.alpha_value()), mb, cfg)?;
    sgd_step(
        theta,
        &clip_grad_norm(&meta.g_meta, cfg.clip_norm),
        LearningRate::Scalar(cfg.beta_value()),
    )
}

/// La-MAML. The learning rates are updated first; the weights then move by
/// `max(0, α_new) ⊙ clip(g_meta)`, so coordinates whose rate went
/// non-positive stay put.
pub fn la_maml_update<M: Model + ?Sized>(
    model: &M,
    theta: &ParamVector,
    lr: &LrState,
    mb: &MetaBatch<'_>,
    cfg: &TrainerConfig,
) -> Result<(ParamVector, LrState)> {
    check_lr(lr, theta)?;
    let rates = inner_rates(lr, cfg);
    let (traj, meta) = unroll(model, theta, LearningRate::PerParam(&rates), mb, cfg)?;
    let g_alpha = hypergradient(&meta, &traj.traj_grads)?;
    let next_lr = step_alpha(lr, &g_alpha, cfg)?;
    let step = next_lr.clamped();
    let theta_next = sgd_step(
        theta,
        &clip_grad_norm(&meta.g_meta, cfg.clip_norm),
        LearningRate::PerParam(&step),
    )?;
    Ok((theta_next, next_lr))
}

/// Sync: learning rates and weights are both updated from the pre-update
/// quantities; the weights use a scalar `β`, unclamped by `α`.
pub fn sync_update<M: Model + ?Sized>(
    model: &M,
    theta: &ParamVector,
    lr: &LrState,
    mb: &MetaBatch<'_>,
    cfg: &TrainerConfig,
) -> Result<(ParamVector, LrState)> {
    check_lr(lr, theta)?;
    let rates = inner_rates(lr, cfg);
    let (traj, meta) = unroll(model, theta, LearningRate::PerParam(&rates), mb, cfg)?;
    let g_alpha = hypergradient(&meta, &traj.traj_grads)?;
    let theta_next = sgd_step(
        theta,
        &clip_grad_norm(&meta.g_meta, cfg.clip_norm),
        LearningRate::Scalar(cfg.beta_value()),
    )?;
    Ok((theta_next, step_alpha(lr, &g_alpha, cfg)?))
}

/// La-ER: learning rates follow the La-MAML hypergradient, but the weights
/// take an ER step (the plain meta-set gradient at `θ_0`) scaled by
/// `max(0, α_new)`.
pub fn la_er_update<M: Model + ?Sized>(
    model: &M,
    theta: &ParamVector,
    lr: &LrState,
    mb: &MetaBatch<'_>,
    cfg: &TrainerConfig,
) -> Result<(ParamVector, LrState)> {
    check_lr(lr, theta)?;
    let rates = inner_rates(lr, cfg);
    let (traj, meta) = unroll(model, theta, LearningRate::PerParam(&rates), mb, cfg)?;
    let g_alpha = hypergradient(&meta, &traj.traj_grads)?;
    let next_lr = step_alpha(lr, &g_alpha, cfg)?;
    let (_, g_er) = model.loss_grad(theta, &mb.meta)?;
    let step = next_lr.clamped();
    let theta_next = sgd_step(theta, &clip_grad_norm(&g_er, cfg.clip_norm), LearningRate::PerParam(&step))?;
    Ok((theta_next, next_lr))
}
