use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lamaml_core::algorithms::{Algorithm, TrainerConfig};
use lamaml_core::harness::acceptance::Acceptance;
use lamaml_core::harness::{
    emit_results, parse_config, render_csv, run_experiment, Benchmark, EmitOptions, ExperimentConfig, StreamSpec,
    SyntheticParams,
};
use lamaml_core::tasks::Protocol;
use lamaml_core::{verify, Error};
use serde_json::json;

/// Online continual learning benchmarks: La-MAML, its ablations and replay
/// baselines.
#[derive(Parser)]
#[command(name = "lamaml", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every seed of an experiment config and write results.csv and
    /// records.jsonl.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds replacing the config's list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Output directory (default: the config's `output`, else out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fill the wall_time_s column (makes the CSV run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Run the numerical oracle suite and print its JSON report.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every trainer on a synthetic stream.
    Bench {
        /// Small stream, finishes in seconds.
        #[arg(long)]
        quick: bool,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
    },
    /// Run acceptance criteria (1-12) and print one PASS/FAIL line each.
    Accept {
        /// Criterion numbers; all twelve when omitted.
        ids: Vec<usize>,
        /// Directory holding the raw digit files.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Print full JSON outcomes instead of one line each.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error("usage", &e.to_string());
            return ExitCode::from(2);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}

fn report_error(kind: &str, message: &str) {
    let line = json!({"error": {"kind": kind, "message": message.trim_end()}});
    let _ = writeln!(std::io::stderr(), "{line}");
}

fn dispatch(cmd: Cmd) -> Result<ExitCode, Error> {
    match cmd {
        Cmd::Run {
            config,
            seeds,
            out,
            timing,
        } => {
            let mut cfg = parse_config(&config)?;
            if let Some(seeds) = seeds {
                cfg.seeds = seeds;
                cfg.validate()?;
            }
            let dir = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| default_out(&cfg));
            let result = run_experiment(&cfg)?;
            let opts = EmitOptions { timing };
            emit_results(&result, &dir, opts)?;
            print!("{}", render_csv(&result.rows(), opts));
            let failed: Vec<String> = result
                .outcomes
                .iter()
                .filter_map(|o| o.result.as_ref().err().map(|e| format!("seed {}: {e}", o.seed)))
                .collect();
            if failed.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                report_error("seed_failed", &failed.join("; "));
                Ok(ExitCode::FAILURE)
            }
        }
        Cmd::Verify { seed, out } => {
            let report = verify::run_all(seed)?;
            let text = serde_json::to_string_pretty(&report)?;
            if let Some(path) = out {
                std::fs::write(&path, &text).map_err(|source| Error::Io { path, source })?;
            }
            println!("{text}");
            Ok(if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Cmd::Bench { quick, seeds } => bench(quick, seeds),
        Cmd::Accept { ids, data_dir, json } => {
            let exe = std::env::current_exe().map_err(|source| Error::Io {
                path: PathBuf::from("lamaml"),
                source,
            })?;
            let acc = Acceptance::new(data_dir).with_executable(exe);
            let ids = if ids.is_empty() { (1..=12).collect() } else { ids };
            let mut all = true;
            for id in ids {
                let o = acc.run(id);
                all &= o.passed;
                if json {
                    println!("{}", serde_json::to_string(&o)?);
                } else {
                    println!("{}", o.line());
                }
            }
            Ok(if all { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn default_out(cfg: &ExperimentConfig) -> PathBuf {
    let name = cfg
        .name
        .clone()
        .unwrap_or_else(|| format!("{}-{}", cfg.benchmark_name(), cfg.trainer.algorithm));
    PathBuf::from("out").join(name)
}

fn bench_trainers() -> Vec<TrainerConfig> {
    let mut sync = TrainerConfig::new(Algorithm::Sync).with_lr_learning(0.1, 0.1).with_glances(3);
    sync.beta = Some(0.1);
    vec![
        TrainerConfig::new(Algorithm::Online).with_lr(0.1),
        TrainerConfig::new(Algorithm::Er).with_lr(0.1).with_glances(3),
        TrainerConfig::new(Algorithm::Agem).with_lr(0.1).with_glances(3),
        TrainerConfig::new(Algorithm::CMaml).with_alpha_beta(0.1, 0.1).with_glances(3),
        sync,
        TrainerConfig::new(Algorithm::LaEr).with_lr_learning(0.1, 0.1).with_glances(3),
        TrainerConfig::new(Algorithm::LaMaml).with_lr_learning(0.1, 0.1).with_glances(3),
    ]
}

fn bench(quick: bool, seeds: Vec<u64>) -> Result<ExitCode, Error> {
    let (tasks, n_per_task, dim, hidden) = if quick { (3, 60, 8, vec![32]) } else { (5, 200, 20, vec![100, 100]) };
    let mut csv = String::new();
    let mut ok = true;
    for mut trainer in bench_trainers() {
        trainer.hidden = hidden.clone();
        let cfg = ExperimentConfig {
            name: None,
            stream: StreamSpec {
                benchmark: Benchmark::Synthetic,
                tasks,
                n_per_task,
                max_test: 0,
                protocol: Protocol::SinglePass,
                batch_size: 10,
                epochs: 1,
                data_dir: None,
                synthetic: Some(SyntheticParams {
                    classes: 4,
                    dim,
                    n_test: 100,
                    separation: 3.0,
                }),
            },
            trainer,
            seeds: seeds.clone(),
            output: None,
            eval_every: None,
            track_alignment: true,
            track_old_task_alignment: false,
        };
        cfg.validate()?;
        let result = run_experiment(&cfg)?;
        ok &= result.outcomes.iter().all(|o| o.result.as_ref().is_ok_and(|r| r.is_complete()));
        let rendered = render_csv(&result.rows(), EmitOptions { timing: true });
        let mut lines = rendered.lines();
        if csv.is_empty() {
            csv.push_str(lines.next().unwrap_or_default());
            csv.push('\n');
        } else {
            lines.next();
        }
        for l in lines {
            csv.push_str(l);
            csv.push('\n');
        }
    }
    print!("{csv}");
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
