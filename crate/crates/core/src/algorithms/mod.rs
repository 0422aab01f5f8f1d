//! Continual-learning trainers.
//!
//! Baselines (Online, ER, A-GEM) take plain SGD steps. The meta-family
//! (C-MAML, Sync, La-ER, La-MAML) unrolls `k` inner SGD steps on the incoming
//! batch, evaluates a meta-loss on the batch plus replayed memories, and
//! updates the weights (and, for the La-* variants, a per-parameter learning
//! rate vector) from first-order gradients of that meta-loss.

mod config;
mod meta;
mod train;
mod updates;

use crate::error::Result;
use crate::nn::{loss_and_grad, Network, ParamVector, Tensor};
use crate::tasks::Example;

pub use config::{Algorithm, MetaLossMode, TrainerConfig};
pub use meta::{
    hypergradient, inner_loop, meta_grad_alpha, meta_grad_theta, InnerTrajectory, LrState,
    MetaBatch, MetaGradients,
};
pub use train::{accuracy, run_training, RunOptions, Trainer};
pub use updates::{
    agem_update, c_maml_update, er_update, la_er_update, la_maml_update, online_update,
    sync_update, AgemOutcome,
};

/// Anything that can report a mean loss gradient on a batch of examples.
///
/// The MLP is the production model; tests and oracles plug in small
/// analytic objectives.
pub trait Model {
    fn num_params(&self) -> usize;

    fn loss_grad(&self, params: &ParamVector, batch: &[&Example]) -> Result<(f64, ParamVector)>;
}

/// Stacks example inputs into a `[B, d]` tensor plus their labels.
pub fn batch_tensor(batch: &[&Example]) -> Result<(Tensor, Vec<usize>)> {
    let x = Tensor::from_rows(&batch.iter().map(|e| e.x.as_slice()).collect::<Vec<_>>())?;
    Ok((x, batch.iter().map(|e| e.y).collect()))
}

impl Model for Network {
    fn num_params(&self) -> usize {
        Network::num_params(self)
    }

    fn loss_grad(&self, params: &ParamVector, batch: &[&Example]) -> Result<(f64, ParamVector)> {
        let (x, y) = batch_tensor(batch)?;
        loss_and_grad(self, params, &x, &y)
    }
}
