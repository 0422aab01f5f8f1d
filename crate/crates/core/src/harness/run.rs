use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Benchmark, ExperimentConfig, StreamSpec};
use super::rng::{labels, seeded_rng};
use crate::algorithms::{run_training, RunOptions};
use crate::error::{Error, Result};
use crate::metrics::{bti, mean_std, retained_accuracy, RunRecord};
use crate::tasks::{
    load_mnist_dir, make_permutation_tasks, make_rotation_tasks, make_synthetic_tasks, Dataset, SyntheticSpec,
    TaskSizing, TaskStream,
};

pub const CSV_HEADER: &str = "algorithm,benchmark,seed,ra,bti,alignment,wall_time_s";
pub const SUMMARY_SEED: &str = "mean±std";

/// Loads the digit base set when the benchmark needs one.
pub fn load_base(spec: &StreamSpec) -> Result<Option<Dataset>> {
    if spec.benchmark.needs_mnist() {
        Ok(Some(load_mnist_dir(spec.resolved_data_dir())?))
    } else {
        Ok(None)
    }
}

/// The task stream for one seed, drawn from that seed's `tasks` stream.
pub fn build_stream(spec: &StreamSpec, base: Option<&Dataset>, glances: usize, seed: u64) -> Result<TaskStream> {
    let mut rng = seeded_rng(seed, labels::TASKS);
    let sizing = TaskSizing {
        n_train: spec.n_per_task,
        max_test: spec.max_test,
    };
    let need_base = || base.ok_or_else(|| Error::InvalidArgument("digit benchmark without base data".into()));
    let (tasks, classes) = match spec.benchmark {
        Benchmark::Rotations => {
            let b = need_base()?;
            (make_rotation_tasks(b, spec.tasks, sizing, &mut rng)?, b.num_classes())
        }
        Benchmark::Permutations => {
            let b = need_base()?;
            (make_permutation_tasks(b, spec.tasks, sizing, &mut rng)?, b.num_classes())
        }
        Benchmark::Synthetic => {
            let p = spec
                .synthetic
                .ok_or_else(|| Error::config("stream.synthetic", "required for the synthetic benchmark"))?;
            let s = SyntheticSpec {
                tasks: spec.tasks,
                classes: p.classes,
                dim: p.dim,
                n_train: spec.n_per_task,
                n_test: p.n_test,
                separation: p.separation,
            };
            (make_synthetic_tasks(&s, &mut rng)?, p.classes)
        }
    };
    TaskStream::new(tasks, spec.protocol, spec.batch_size, glances, spec.epochs, classes)
}

/// One seed's run, or the error that stopped it.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub result: std::result::Result<RunRecord, String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub algorithm: String,
    pub benchmark: String,
    pub outcomes: Vec<SeedOutcome>,
}

impl ExperimentResult {
    pub fn records(&self) -> impl Iterator<Item = &RunRecord> {
        self.outcomes.iter().filter_map(|o| o.result.as_ref().ok())
    }

    /// Per-seed rows in seed order followed by the summary row.
    pub fn rows(&self) -> Vec<ResultRow> {
        let mut rows: Vec<ResultRow> = self
            .outcomes
            .iter()
            .map(|o| {
                let rec = o.result.as_ref().ok();
                ResultRow {
                    algorithm: self.algorithm.clone(),
                    benchmark: self.benchmark.clone(),
                    seed: o.seed.to_string(),
                    ra: rec.and_then(|r| retained_accuracy(r).ok()).map(Cell::Value),
                    bti: rec.and_then(|r| bti(r).ok()).map(Cell::Value),
                    alignment: rec.and_then(|r| r.alignment).map(Cell::Value),
                    wall_time_s: rec.map(|r| Cell::Value(r.wall_time_s)),
                }
            })
            .collect();
        if !rows.is_empty() {
            let summary = |f: fn(&ResultRow) -> Option<Cell>| -> Option<Cell> {
                let vals: Vec<f64> = rows.iter().filter_map(|r| f(r).map(|c| c.mean())).collect();
                mean_std(&vals).map(|(m, s)| Cell::MeanStd(m, s))
            };
            let row = ResultRow {
                algorithm: self.algorithm.clone(),
                benchmark: self.benchmark.clone(),
                seed: SUMMARY_SEED.into(),
                ra: summary(|r| r.ra),
                bti: summary(|r| r.bti),
                alignment: summary(|r| r.alignment),
                wall_time_s: summary(|r| r.wall_time_s),
            };
            rows.push(row);
        }
        rows
    }

    /// Mean and sample std of the per-seed retained accuracies.
    pub fn ra_summary(&self) -> Option<(f64, f64)> {
        mean_std(&self.records().filter_map(|r| retained_accuracy(r).ok()).collect::<Vec<_>>())
    }

    pub fn bti_summary(&self) -> Option<(f64, f64)> {
        mean_std(&self.records().filter_map(|r| bti(r).ok()).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Value(f64),
    MeanStd(f64, f64),
}

impl Cell {
    fn mean(self) -> f64 {
        match self {
            Cell::Value(v) | Cell::MeanStd(v, _) => v,
        }
    }

    fn render(self) -> String {
        match self {
            Cell::Value(v) => format!("{v}"),
            Cell::MeanStd(m, s) => format!("{m:.4}±{s:.4}"),
        }
    }
}

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub algorithm: String,
    pub benchmark: String,
    /// A seed number, or [`SUMMARY_SEED`].
    pub seed: String,
    pub ra: Option<Cell>,
    pub bti: Option<Cell>,
    pub alignment: Option<Cell>,
    pub wall_time_s: Option<Cell>,
}

/// Runs every seed of `cfg`. Seeds run on the rayon pool; results come back
/// in config order. A failing seed is recorded and does not affect others.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let base = load_base(&cfg.stream)?;
    let opts = RunOptions {
        track_alignment: cfg.track_alignment,
        track_old_task_alignment: cfg.track_old_task_alignment,
        eval_every: cfg.eval_every,
    };
    let outcomes = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let result = build_stream(&cfg.stream, base.as_ref(), cfg.trainer.glances, seed)
                .and_then(|stream| run_training(&stream, &cfg.trainer, &opts, seed))
                .map_err(|e| format!("{}: {e}", e.kind()));
            SeedOutcome { seed, result }
        })
        .collect();
    Ok(ExperimentResult {
        algorithm: cfg.trainer.algorithm.name().to_string(),
        benchmark: cfg.benchmark_name().to_string(),
        outcomes,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EmitOptions {
    /// Fill the `wall_time_s` column. Off by default so identical runs give
    /// byte-identical CSV files.
    pub timing: bool,
}

pub fn render_csv(rows: &[ResultRow], opts: EmitOptions) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let cell = |c: Option<Cell>| c.map(Cell::render).unwrap_or_default();
    for r in rows {
        let wall = if opts.timing { cell(r.wall_time_s) } else { String::new() };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.algorithm,
            r.benchmark,
            r.seed,
            cell(r.ra),
            cell(r.bti),
            cell(r.alignment),
            wall
        );
    }
    out
}

#[derive(Serialize)]
struct RecordLine<'a> {
    benchmark: &'a str,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    record: Option<&'a RunRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `results.csv` and `records.jsonl` (full accuracy matrices and
/// curves, one line per seed) into `dir`, creating it if needed.
pub fn emit_results(result: &ExperimentResult, dir: &Path, opts: EmitOptions) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let csv = dir.join("results.csv");
    write_file(&csv, &render_csv(&result.rows(), opts))?;
    let mut jsonl = String::new();
    for o in &result.outcomes {
        let line = RecordLine {
            benchmark: &result.benchmark,
            seed: o.seed,
            record: o.result.as_ref().ok(),
            error: o.result.as_ref().err().map(String::as_str),
        };
        jsonl.push_str(&serde_json::to_string(&line)?);
        jsonl.push('\n');
    }
    let records = dir.join("records.jsonl");
    write_file(&records, &jsonl)?;
    Ok(vec![csv, records])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth_cfg(seeds: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{
            "stream": {{"benchmark": "synthetic", "tasks": 2, "n_per_task": 40,
                       "synthetic": {{"classes": 3, "dim": 4, "n_test": 30, "separation": 4.0}}}},
            "trainer": {{"algorithm": "er", "lr": 0.1, "hidden": [8]}},
            "seeds": {seeds}
        }}"#
        ))
        .unwrap()
    }

    #[test]
    fn header_only_for_no_rows() {
        assert_eq!(render_csv(&[], EmitOptions::default()), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn two_seeds_give_two_rows_and_a_summary() {
        let res = run_experiment(&synth_cfg("[0, 1]")).unwrap();
        let rows = res.rows();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].seed, "0");
        assert_eq!(rows[1].seed, "1");
        assert_eq!(rows[2].seed, SUMMARY_SEED);
        let csv = render_csv(&rows, EmitOptions::default());
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().last().unwrap().contains("±"));
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = render_csv(&run_experiment(&synth_cfg("[3]")).unwrap().rows(), EmitOptions::default());
        let b = render_csv(&run_experiment(&synth_cfg("[3]")).unwrap().rows(), EmitOptions::default());
        assert_eq!(a, b);
    }

    #[test]
    fn emits_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let res = run_experiment(&synth_cfg("[0]")).unwrap();
        let files = emit_results(&res, dir.path(), EmitOptions { timing: true }).unwrap();
        let jsonl = fs::read_to_string(&files[1]).unwrap();
        let v: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
        assert_eq!(v["record"]["acc"].as_array().unwrap().len(), 2);
        let csv = fs::read_to_string(&files[0]).unwrap();
        assert!(!csv.lines().nth(1).unwrap().ends_with(','));
    }

    #[test]
    fn unwritable_output_is_an_error() {
        let file = tempfile::NamedTempFile::new().unwrap();
        let res = run_experiment(&synth_cfg("[0]")).unwrap();
        let err = emit_results(&res, &file.path().join("sub"), EmitOptions::default()).unwrap_err();
        assert_eq!(err.kind(), "io");
    }
}
