//! Command-line driver: `explia <stage> --config <path> [--seed N] [--out DIR]`.
//!
//! Exit codes: 0 success, 1 stage failure, 2 config error.

mod config;
mod stages;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use config::{
    AgreeConfig, BalanceConfig, DataConfig, DataSource, ExplainConfig, Mode, ModelsConfig, PipelineConfig,
    RfeStageConfig, ScoreOn, SplitConfig, DATA_DIR_ENV,
};
pub use stages::{
    agree, balance, evaluate, explain, ingest, load_evaluation, load_model, load_part, load_rfe, rfe, select_model,
    train_stage, EvaluateSummary, ModelScore, RfeSummary, SplitPart, StageOutcome, STAGES,
};

use crate::error::{Error, Result};
use crate::seed;

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Parser)]
#[command(name = "explia", version, about = "Explainable intrusion detection pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// TOML config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load, clean, standardize and drop constant columns.
    Ingest(CommonArgs),
    /// Rebalance with SMOTE and undersampling, then split.
    Balance(CommonArgs),
    /// Train the configured models.
    Train(CommonArgs),
    /// Score models on the test split and select the best.
    Evaluate(CommonArgs),
    /// Global SHAP, per-sample force data and LIME.
    Explain(CommonArgs),
    /// Cross-check SHAP and LIME and compare importance rankings.
    Agree(CommonArgs),
    /// Recursive feature elimination on the selected model.
    Rfe(CommonArgs),
    /// Every stage in order plus a run report.
    Pipeline(CommonArgs),
}

impl Command {
    fn parts(&self) -> (&'static str, &CommonArgs) {
        match self {
            Command::Ingest(a) => ("ingest", a),
            Command::Balance(a) => ("balance", a),
            Command::Train(a) => ("train", a),
            Command::Evaluate(a) => ("evaluate", a),
            Command::Explain(a) => ("explain", a),
            Command::Agree(a) => ("agree", a),
            Command::Rfe(a) => ("rfe", a),
            Command::Pipeline(a) => ("pipeline", a),
        }
    }
}

/// Loads the config and applies command-line overrides.
pub fn resolve_config(args: &CommonArgs) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

pub fn run_stage(name: &str, cfg: &PipelineConfig) -> Result<StageOutcome> {
    match name {
        "ingest" => ingest(cfg),
        "balance" => balance(cfg),
        "train" => train_stage(cfg),
        "evaluate" => evaluate(cfg),
        "explain" => explain(cfg),
        "agree" => agree(cfg),
        "rfe" => rfe(cfg),
        other => Err(Error::Parameter(format!("unknown stage `{other}`"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: String,
    pub seconds: f64,
    pub counts: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArtifactEntry {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Everything a pipeline run produced. Only `stages[].seconds` varies
/// between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub stages: Vec<StageSummary>,
    pub metrics: EvaluateSummary,
    pub importance: Value,
    pub agreement: Value,
    pub rfe: RfeSummary,
    pub manifest: Vec<ArtifactEntry>,
}

impl RunReport {
    /// The report with timings zeroed, for comparisons across runs.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for s in &mut r.stages {
            s.seconds = 0.0;
        }
        r
    }
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for e in entries {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.is_dir() {
            collect_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// SHA-256 of every stage artifact under `out` (the report itself excluded),
/// sorted by path.
pub fn manifest(out: &Path) -> Result<Vec<ArtifactEntry>> {
    let mut files = Vec::new();
    for stage in STAGES {
        let d = out.join(stage);
        if d.is_dir() {
            collect_files(&d, &mut files)?;
        }
    }
    let mut entries = files
        .iter()
        .map(|p| {
            let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
            let rel = p.strip_prefix(out).expect("file lies under out");
            Ok(ArtifactEntry {
                path: rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"),
                bytes: bytes.len() as u64,
                sha256: seed::sha256_hex(&bytes),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

fn read_value(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

/// Runs every stage in order. Stage directories from earlier runs are
/// removed first, so a failed stage leaves no later artifacts behind.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    for stage in STAGES {
        let d = cfg.out_dir.join(stage);
        if d.is_dir() {
            std::fs::remove_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
    }
    let report_path = cfg.out_dir.join(REPORT_FILE);
    if report_path.exists() {
        std::fs::remove_file(&report_path).map_err(|e| Error::io(&report_path, e))?;
    }
    let mut stages = Vec::new();
    for stage in STAGES {
        eprintln!("[explia] stage {stage}");
        let t = Instant::now();
        let outcome = run_stage(stage, cfg)?;
        stages.push(StageSummary {
            stage: outcome.stage,
            seconds: t.elapsed().as_secs_f64(),
            counts: outcome.counts,
        });
    }
    let report = RunReport {
        config: cfg.clone(),
        stages,
        metrics: load_evaluation(&cfg.out_dir)?,
        importance: read_value(&cfg.out_dir.join("explain").join("importance.json"))?,
        agreement: read_value(&cfg.out_dir.join("agree").join("agreement.json"))?,
        rfe: load_rfe(&cfg.out_dir)?,
        manifest: manifest(&cfg.out_dir)?,
    };
    stages::write_json(&report_path, &report)?;
    Ok(report)
}

fn set_workers(n: usize) {
    if n > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (name, args) = cli.command.parts();
    let cfg = match resolve_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    set_workers(cfg.workers);
    if let Err(e) = std::fs::create_dir_all(&cfg.out_dir) {
        eprintln!("error: {}: {e}", cfg.out_dir.display());
        return 1;
    }
    let result = if name == "pipeline" {
        run_pipeline(&cfg).map(|r| {
            println!("{}", cfg.out_dir.join(REPORT_FILE).display());
            eprintln!("[explia] done: {} artifacts", r.manifest.len());
        })
    } else {
        run_stage(name, &cfg).map(|o| {
            for a in &o.artifacts {
                println!("{}", a.display());
            }
        })
    };
    match result {
        Ok(()) => 0,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
