//! Dense-tensor MLP with exact gradients.
//!
//! Everything is 64-bit. Parameters of a [`Network`] live in a single flat
//! [`ParamVector`]; the same shape carries gradients and per-parameter
//! learning rates.

mod gradcheck;
mod mlp;
mod params;
mod tensor;

pub use gradcheck::{finite_diff_grad, relative_l2_error};
pub use mlp::{
    backward, forward, loss_and_grad, loss_xent, mean_loss, softmax, Activation, ForwardCache,
    Network,
};
pub use params::{clip_grad_norm, sgd_step, LearningRate, ParamVector};
pub use tensor::Tensor;
