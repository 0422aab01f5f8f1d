//! Online continual learning with look-ahead meta-learned per-parameter
//! learning rates (La-MAML), its ablations (C-MAML, Sync, La-ER) and the
//! replay baselines it is measured against (Online, ER, A-GEM).
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: dense MLP with exact forward/backward passes and a
//!   finite-difference oracle.
//! - [`replay`]: reservoir-sampled episodic memory.
//! - [`tasks`]: IDX ingestion and rotated / permuted / synthetic task streams.
//! - [`algorithms`]: every trainer and the training loop.
//! - [`metrics`]: retained accuracy, backward transfer, gradient alignment.
//! - [`verify`]: numerical certification of the hypergradient and the
//!   first-order objective equivalence.
//! - [`harness`]: configs, seeded runs, result emission and the acceptance
//!   criteria.

pub mod algorithms;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod replay;
pub mod tasks;
pub mod verify;

pub use error::{Error, Result};
