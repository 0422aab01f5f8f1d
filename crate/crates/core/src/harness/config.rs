use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algorithms::TrainerConfig;
use crate::error::{Error, Result};
use crate::tasks::{Protocol, DEFAULT_TEST_PER_TASK, MNIST_FILES};

/// Overrides the directory holding the four raw MNIST IDX files.
pub const DATA_DIR_ENV: &str = "LAMAML_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "data/mnist";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Benchmark {
    Rotations,
    Permutations,
    Synthetic,
}

impl Benchmark {
    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Rotations => "rotations",
            Benchmark::Permutations => "permutations",
            Benchmark::Synthetic => "synthetic",
        }
    }

    pub fn needs_mnist(self) -> bool {
        !matches!(self, Benchmark::Synthetic)
    }
}

/// Gaussian-blob parameters; task count and training size come from the
/// enclosing stream spec.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticParams {
    pub classes: usize,
    pub dim: usize,
    pub n_test: usize,
    pub separation: f64,
}

fn default_batch() -> usize {
    10
}
fn default_one() -> usize {
    1
}
fn default_protocol() -> Protocol {
    Protocol::SinglePass
}
fn default_max_test() -> usize {
    DEFAULT_TEST_PER_TASK
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSpec {
    pub benchmark: Benchmark,
    pub tasks: usize,
    pub n_per_task: usize,
    /// Cap on test examples per task (digit benchmarks).
    #[serde(default = "default_max_test")]
    pub max_test: usize,
    #[serde(default = "default_protocol")]
    pub protocol: Protocol,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_one")]
    pub epochs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticParams>,
}

impl StreamSpec {
    /// `$LAMAML_DATA_DIR`, else the configured directory, else `data/mnist`.
    pub fn resolved_data_dir(&self) -> PathBuf {
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(dir);
        }
        self.data_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub stream: StreamSpec,
    pub trainer: TrainerConfig,
    pub seeds: Vec<u64>,
    /// Directory for `results.csv` and `records.jsonl`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Evaluate seen tasks every this many updates in addition to task ends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_every: Option<u64>,
    #[serde(default = "default_true")]
    pub track_alignment: bool,
    #[serde(default)]
    pub track_old_task_alignment: bool,
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "<root>".to_string() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Structural checks plus, for digit benchmarks, that every data file
    /// exists.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        let s = &self.stream;
        if s.tasks == 0 || s.n_per_task == 0 {
            return Err(Error::config("stream", "tasks and n_per_task must be >= 1"));
        }
        if s.batch_size == 0 {
            return Err(Error::config("stream.batch_size", "must be >= 1"));
        }
        if s.epochs == 0 {
            return Err(Error::config("stream.epochs", "must be >= 1"));
        }
        match s.protocol {
            Protocol::SinglePass if s.epochs != 1 => {
                return Err(Error::config("stream.epochs", "single-pass streams use exactly one epoch"))
            }
            Protocol::MultiPass if self.trainer.glances != 1 => {
                return Err(Error::config("trainer.glances", "multi-pass streams use one glance per batch"))
            }
            _ => {}
        }
        self.trainer.validate(s.batch_size)?;
        match (s.benchmark, &s.synthetic) {
            (Benchmark::Synthetic, None) => {
                return Err(Error::config("stream.synthetic", "required for the synthetic benchmark"))
            }
            (Benchmark::Synthetic, Some(p)) => {
                if p.classes < 2 || p.dim == 0 || p.n_test == 0 {
                    return Err(Error::config("stream.synthetic", "need classes >= 2, dim >= 1, n_test >= 1"));
                }
                if !(p.separation > 0.0 && p.separation.is_finite()) {
                    return Err(Error::config("stream.synthetic.separation", "must be finite and > 0"));
                }
            }
            (_, Some(_)) => {
                return Err(Error::config("stream.synthetic", "only valid for the synthetic benchmark"))
            }
            (_, None) => check_data_dir(&s.resolved_data_dir())?,
        }
        Ok(())
    }

    pub fn benchmark_name(&self) -> &'static str {
        self.stream.benchmark.name()
    }
}

fn check_data_dir(dir: &Path) -> Result<()> {
    for (images, labels) in MNIST_FILES {
        for f in [images, labels] {
            let p = dir.join(f);
            if !p.is_file() {
                return Err(Error::config(
                    "stream.data_dir",
                    format!("missing data file {} (set {DATA_DIR_ENV} to override)", p.display()),
                ));
            }
        }
    }
    Ok(())
}

/// Reads and validates an experiment config.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentConfig::from_json(&text)
}
