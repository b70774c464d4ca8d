//! End-to-end runs of the command-line entry point on a small synthetic
//! configuration.

use std::path::Path;

use explia::cli::{load_part, main_with_args, manifest, RunReport, REPORT_FILE, STAGES};
use explia::seed::sha256_hex;

const SMALL: &str = r#"
seed = 5

[data]
source = "synthetic"
synthetic_rows = 2000

[balance]
k = 5
clamp_k = true
targets = { Benign = 300, Bruteforce = 50, DDoS = 50, DoS = 50, Mirai = 50, Recon = 50, Spoofing = 50, Web = 50 }

[models.gbt]
n_trees = 30

[models.rf]
n_trees = 20

[explain]
background = 20
global_rows = 40
n_permutations = 20
samples = [0, 3]

[explain.lime]
n_samples = 500

[agree]
n_samples = 10

[rfe]
shap_rows = 30
shap_background = 10
"#;

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("explia.toml");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("explia").chain(args.iter().copied()))
}

#[test]
fn pipeline_writes_a_complete_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    assert_eq!(run(&["pipeline", "--config", &cfg]), 0);
    let out = dir.path().join("out");
    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(out.join(REPORT_FILE)).unwrap()).unwrap();
    assert_eq!(report.stages.iter().map(|s| s.stage.as_str()).collect::<Vec<_>>(), STAGES);
    assert!(!report.manifest.is_empty());
    for entry in &report.manifest {
        let bytes = std::fs::read(out.join(&entry.path)).unwrap();
        assert_eq!(bytes.len() as u64, entry.bytes, "{}", entry.path);
        assert_eq!(sha256_hex(&bytes), entry.sha256, "{}", entry.path);
    }
    for stage in STAGES {
        assert!(report.manifest.iter().any(|e| e.path.starts_with(&format!("{stage}/"))), "no artifacts from {stage}");
    }
    for row in [0, 3] {
        assert!(out.join("explain").join(format!("sample_{row}_force.csv")).is_file());
        assert!(out.join("explain").join(format!("sample_{row}_lime.csv")).is_file());
    }
    assert!(report.rfe.trace.acceptance_holds());
}

#[test]
fn stages_run_one_by_one_match_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let a_str = a.to_string_lossy().into_owned();
    for stage in STAGES {
        assert_eq!(run(&[stage, "--config", &cfg, "--out", &a_str]), 0, "stage {stage}");
    }
    assert_eq!(run(&["pipeline", "--config", &cfg, "--out", &b.to_string_lossy()]), 0);
    assert_eq!(manifest(&a).unwrap(), manifest(&b).unwrap());
}

#[test]
fn ingest_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let clean = dir.path().join("out").join("ingest").join("clean.csv");
    assert_eq!(run(&["ingest", "--config", &cfg]), 0);
    let first = std::fs::read(&clean).unwrap();
    assert_eq!(run(&["ingest", "--config", &cfg]), 0);
    assert_eq!(std::fs::read(&clean).unwrap(), first);
}

#[test]
fn leakage_safe_mode_keeps_synthetic_rows_out_of_test() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("mode = \"leakage_safe\"\n{SMALL}"));
    assert_eq!(run(&["ingest", "--config", &cfg]), 0);
    assert_eq!(run(&["balance", "--config", &cfg]), 0);
    let bal = dir.path().join("out").join("balance");
    let test = load_part(&bal.join("test.csv")).unwrap();
    let train = load_part(&bal.join("train.csv")).unwrap();
    assert!(!test.synthetic.is_empty());
    assert!(test.synthetic.iter().all(|&s| !s));
    assert!(train.synthetic.iter().any(|&s| s));
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}\n[split]\nratoi = 0.7\n"));
    assert_eq!(run(&["ingest", "--config", &cfg]), 2);
    assert!(!dir.path().join("out").join("ingest").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["ingest"]), 2);
    assert_eq!(run(&["frobnicate", "--config", "x.toml"]), 2);
    assert_eq!(run(&["ingest", "--config", "/nonexistent/explia.toml"]), 2);
}

#[test]
fn missing_or_empty_data_dir_fails_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    for data in [empty.clone(), dir.path().join("missing")] {
        let body = format!("[data]\nsource = \"files\"\ndir = {:?}\n", data.to_string_lossy());
        let cfg = write_config(dir.path(), &body);
        assert_eq!(run(&["ingest", "--config", &cfg]), 1, "{}", data.display());
    }
}

#[test]
fn out_of_range_sample_row_fails_explain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("samples = [0, 3]", "samples = [0, 100000]"));
    for stage in ["ingest", "balance", "train", "evaluate"] {
        assert_eq!(run(&[stage, "--config", &cfg]), 0, "stage {stage}");
    }
    assert_eq!(run(&["explain", "--config", &cfg]), 1);
}

#[test]
fn later_stage_without_inputs_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    assert_eq!(run(&["train", "--config", &cfg]), 1);
}
