//! Experiment configs, seeded multi-seed runs, result files and the
//! acceptance criteria.

pub mod acceptance;
mod config;
pub mod rng;
mod run;

pub use config::{
    parse_config, Benchmark, ExperimentConfig, StreamSpec, SyntheticParams, DATA_DIR_ENV, DEFAULT_DATA_DIR,
};
pub use rng::{seeded_rng, RunRng};
pub use run::{
    build_stream, emit_results, load_base, render_csv, run_experiment, Cell, EmitOptions, ExperimentResult,
    ResultRow, SeedOutcome, CSV_HEADER, SUMMARY_SEED,
};
