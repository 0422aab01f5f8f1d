use std::path::Path;
use std::process::{Command, Output};

fn lamaml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lamaml")).args(args).output().unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    serde_json::from_str(stderr.lines().last().unwrap()).unwrap()
}

const SYNTH: &str = r#"{
    "stream": {"benchmark": "synthetic", "tasks": 2, "n_per_task": 30,
               "synthetic": {"classes": 3, "dim": 4, "n_test": 20, "separation": 3.0}},
    "trainer": {"algorithm": "la-maml", "alpha_init": 0.1, "eta": 0.1, "hidden": [8]},
    "seeds": [0, 1]
}"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_writes_csv_and_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SYNTH);
    let out = dir.path().join("out");
    let o = lamaml(&["run", "--config", &cfg, "--seeds", "3,4,5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(String::from_utf8(o.stdout).unwrap(), csv);
    let seeds: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(seeds, ["3", "4", "5", "mean±std"]);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(',')), "no timing unless asked");
    let jsonl = std::fs::read_to_string(out.join("records.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 3);
}

#[test]
fn config_errors_are_json_with_the_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &SYNTH.replace(r#""eta": 0.1"#, r#""eta": 0.1, "k": 3"#));
    let o = lamaml(&["run", "--config", &cfg]);
    assert!(!o.status.success());
    let e = error_json(&o);
    assert_eq!(e["error"]["kind"], "config");
    assert!(e["error"]["message"].as_str().unwrap().contains("trainer.k"), "{e}");

    let cfg = write(dir.path(), "d.json", &SYNTH.replace("\"seeds\"", "\"sedes\""));
    let e = error_json(&lamaml(&["run", "--config", &cfg]));
    assert_eq!(e["error"]["kind"], "config");
}

#[test]
fn missing_files_and_bad_usage_fail_with_json() {
    let o = lamaml(&["run", "--config", "/nonexistent/config.json"]);
    assert!(!o.status.success());
    assert_eq!(error_json(&o)["error"]["kind"], "io");

    let o = lamaml(&["frobnicate"]);
    assert!(!o.status.success());
    assert_eq!(error_json(&o)["error"]["kind"], "usage");
}

#[test]
fn quick_bench_covers_every_trainer() {
    let o = lamaml(&["bench", "--quick"]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    for algo in ["online", "er", "agem", "c-maml", "sync", "la-er", "la-maml"] {
        assert!(stdout.lines().any(|l| l.starts_with(&format!("{algo},synthetic,0,"))), "{algo}\n{stdout}");
    }
}

#[test]
fn verify_prints_a_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.json");
    let o = lamaml(&["verify", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["hypergradient"].as_array().unwrap().len(), 8);
    assert_eq!(std::fs::read_to_string(&path).unwrap().trim(), String::from_utf8(o.stdout).unwrap().trim());
}

#[test]
fn accept_rejects_unknown_criteria() {
    let o = lamaml(&["accept", "13"]);
    assert!(!o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("FAIL [13]"));
}
