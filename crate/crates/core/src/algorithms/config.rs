use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Online,
    Er,
    Agem,
    CMaml,
    Sync,
    LaEr,
    LaMaml,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Online,
        Algorithm::Er,
        Algorithm::Agem,
        Algorithm::CMaml,
        Algorithm::Sync,
        Algorithm::LaEr,
        Algorithm::LaMaml,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Online => "online",
            Algorithm::Er => "er",
            Algorithm::Agem => "agem",
            Algorithm::CMaml => "c-maml",
            Algorithm::Sync => "sync",
            Algorithm::LaEr => "la-er",
            Algorithm::LaMaml => "la-maml",
        }
    }

    pub fn uses_replay(self) -> bool {
        !matches!(self, Algorithm::Online)
    }

    /// Unrolls an inner loop on the incoming batch.
    pub fn is_meta(self) -> bool {
        matches!(self, Algorithm::CMaml | Algorithm::Sync | Algorithm::LaEr | Algorithm::LaMaml)
    }

    /// Carries learnable per-parameter learning rates.
    pub fn learns_lr(self) -> bool {
        matches!(self, Algorithm::Sync | Algorithm::LaEr | Algorithm::LaMaml)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Where the meta-loss is evaluated along the inner trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetaLossMode {
    /// Sum of the meta-losses at every inner step `θ_1..θ_k`.
    AllSteps,
    /// Meta-loss at the final fast weights `θ_k` only.
    LastStep,
}

fn default_replay_capacity() -> usize {
    200
}
fn default_replay_batch() -> usize {
    10
}
fn default_clip() -> f64 {
    2.0
}
fn default_glances() -> usize {
    1
}
fn default_hidden() -> Vec<usize> {
    vec![100, 100]
}
fn default_meta_loss() -> MetaLossMode {
    MetaLossMode::AllSteps
}

/// Hyperparameters of one trainer. Only the fields its algorithm reads are
/// required; [`TrainerConfig::validate`] checks that they are present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerConfig {
    pub algorithm: Algorithm,
    /// Inner steps per meta-update; defaults to the batch size (one example
    /// per step).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// SGD step for Online, ER and A-GEM.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    /// C-MAML inner step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Scalar outer step (C-MAML, Sync).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Initial value of every learnable learning rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_init: Option<f64>,
    /// Learning rate of the learning rates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default = "default_replay_capacity")]
    pub replay_capacity: usize,
    /// Memories drawn per update to join the incoming batch.
    #[serde(default = "default_replay_batch")]
    pub replay_batch: usize,
    #[serde(default = "default_clip")]
    pub clip_norm: f64,
    #[serde(default = "default_meta_loss")]
    pub meta_loss: MetaLossMode,
    #[serde(default = "default_glances")]
    pub glances: usize,
    /// Also clamp learning rates at zero inside the inner loop.
    #[serde(default)]
    pub clip_inner_alpha: bool,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
}

impl TrainerConfig {
    /// A config with every optional field unset and defaults elsewhere.
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            k: None,
            lr: None,
            alpha: None,
            beta: None,
            alpha_init: None,
            eta: None,
            replay_capacity: default_replay_capacity(),
            replay_batch: default_replay_batch(),
            clip_norm: default_clip(),
            meta_loss: default_meta_loss(),
            glances: default_glances(),
            clip_inner_alpha: false,
            hidden: default_hidden(),
        }
    }

    pub fn with_lr(mut self, lr: f64) -> Self {
        self.lr = Some(lr);
        self
    }

    pub fn with_alpha_beta(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = Some(alpha);
        self.beta = Some(beta);
        self
    }

    pub fn with_lr_learning(mut self, alpha_init: f64, eta: f64) -> Self {
        self.alpha_init = Some(alpha_init);
        self.eta = Some(eta);
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn with_glances(mut self, glances: usize) -> Self {
        self.glances = glances;
        self
    }

    /// Inner steps for a given batch size.
    pub fn inner_steps(&self, batch_size: usize) -> usize {
        self.k.unwrap_or(batch_size)
    }

    fn require(&self, name: &str, value: Option<f64>, allow_zero: bool) -> Result<()> {
        match value {
            None => Err(Error::config(
                format!("trainer.{name}"),
                format!("required for algorithm `{}`", self.algorithm),
            )),
            Some(v) if !v.is_finite() || v < 0.0 || (!allow_zero && v == 0.0) => Err(Error::config(
                format!("trainer.{name}"),
                format!("must be {}, got {v}", if allow_zero { "finite and >= 0" } else { "> 0" }),
            )),
            Some(_) => Ok(()),
        }
    }

    /// Checks that the fields the algorithm needs are present and sane, and
    /// that `k` divides `batch_size`.
    pub fn validate(&self, batch_size: usize) -> Result<()> {
        use Algorithm::*;
        match self.algorithm {
            Online | Er | Agem => self.require("lr", self.lr, true)?,
            CMaml => {
                self.require("alpha", self.alpha, true)?;
                self.require("beta", self.beta, true)?;
            }
            Sync => {
                self.require("alpha_init", self.alpha_init, false)?;
                self.require("eta", self.eta, true)?;
                self.require("beta", self.beta, true)?;
            }
            LaEr | LaMaml => {
                self.require("alpha_init", self.alpha_init, false)?;
                self.require("eta", self.eta, true)?;
            }
        }
        if self.algorithm.is_meta() {
            let k = self.inner_steps(batch_size);
            if k == 0 || batch_size % k != 0 {
                return Err(Error::config(
                    "trainer.k",
                    format!("k = {k} must be >= 1 and divide the batch size {batch_size}"),
                ));
            }
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::config("trainer.clip_norm", format!("must be > 0, got {}", self.clip_norm)));
        }
        if self.glances == 0 {
            return Err(Error::config("trainer.glances", "must be >= 1"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::config("trainer.hidden", "need at least one non-empty hidden layer"));
        }
        Ok(())
    }

    pub(crate) fn lr_value(&self) -> f64 {
        self.lr.expect("validated: lr")
    }
    pub(crate) fn alpha_value(&self) -> f64 {
        self.alpha.expect("validated: alpha")
    }
    pub(crate) fn beta_value(&self) -> f64 {
        self.beta.expect("validated: beta")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_must_divide_batch() {
        let cfg = TrainerConfig::new(Algorithm::LaMaml).with_lr_learning(0.3, 0.15).with_k(3);
        let err = cfg.validate(10).unwrap_err().to_string();
        assert!(err.contains("k = 3") && err.contains("10"), "{err}");
        assert!(cfg.clone().with_k(5).validate(10).is_ok());
        assert!(cfg.with_k(0).validate(10).is_err());
    }

    #[test]
    fn only_relevant_fields_are_required() {
        assert!(TrainerConfig::new(Algorithm::Online).validate(10).is_err());
        assert!(TrainerConfig::new(Algorithm::Online).with_lr(0.1).validate(10).is_ok());
        assert!(TrainerConfig::new(Algorithm::CMaml).with_alpha_beta(0.1, 0.1).validate(10).is_ok());
        let sync = TrainerConfig::new(Algorithm::Sync).with_lr_learning(0.15, 0.1);
        assert!(sync.validate(10).is_err());
        let mut sync = sync;
        sync.beta = Some(0.3);
        assert!(sync.validate(10).is_ok());
        assert!(TrainerConfig::new(Algorithm::LaMaml).with_lr_learning(0.0, 0.1).validate(10).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<TrainerConfig>(r#"{"algorithm": "er", "lr": 0.1, "lrr": 1}"#).unwrap_err();
        assert!(err.to_string().contains("lrr"));
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            let s = serde_json::to_string(&a).unwrap();
            assert_eq!(s, format!("\"{}\"", a.name()));
            assert_eq!(serde_json::from_str::<Algorithm>(&s).unwrap(), a);
        }
    }
}
