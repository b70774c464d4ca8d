//! One function per pipeline stage. Each stage reads the previous stages'
//! artifacts from the output directory, so subcommands can run on their own.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{DataSource, Mode, PipelineConfig, ScoreOn, DATA_DIR_ENV};
use crate::balance::{apply_plan, binarize, BalancePlan, GroupCount, SmoteParams};
use crate::consistency::{agreement_report, AgreementConfig, RankingSource};
use crate::dataset::{
    choose_files, clean, drop_zero_variance, encode_labels, fit_standardizer, load_csv, read_matrix_csv, read_toml,
    split, standardize, write_matrix_csv, write_toml, DatasetMeta, FeatureMatrix, FeatureSchema, LabelLevel,
    LabelTaxonomy, LabelVector, RawTable, ScalerMeta, META_FORMAT,
};
use crate::error::{Error, Result};
use crate::explain::{
    default_method, explain_instance, force_breakdown, lime_explain, sample_background, shap_global, LimeParams,
};
use crate::models::{
    deserialize, importance_gain, importance_permutation, serialize, train, ImportanceMethod, ImportanceVector, Metrics,
    ModelKind, TrainedModel,
};
use crate::rfe::{resolve_features, rfe_run, xai_guided_seed, RfeTrace};
use crate::seed;
use crate::synth::{ciciot_like, FlowConfig};

pub const STAGES: [&str; 7] = ["ingest", "balance", "train", "evaluate", "explain", "agree", "rfe"];

/// What a stage did: counters for the report and the files it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub stage: String,
    pub counts: BTreeMap<String, Value>,
    pub artifacts: Vec<PathBuf>,
}

impl StageOutcome {
    fn new(stage: &str) -> Self {
        Self {
            stage: stage.to_string(),
            counts: BTreeMap::new(),
            artifacts: Vec::new(),
        }
    }

    fn count(&mut self, key: &str, v: impl Into<Value>) {
        self.counts.insert(key.to_string(), v.into());
    }
}

fn stage_dir(out: &Path, stage: &str) -> Result<PathBuf> {
    let d = out.join(stage);
    std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    Ok(d)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact is plain data");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

// ---- ingest ----

fn data_files(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    if !cfg.data.files.is_empty() {
        return Ok(choose_files(&cfg.data.files, cfg.data.max_files, seed::derive(cfg.seed, "files")));
    }
    let dir = match &cfg.data.dir {
        Some(d) => d.clone(),
        None => std::env::var_os(DATA_DIR_ENV)
            .map(PathBuf::from)
            .ok_or_else(|| Error::Config(format!("no data.dir in config and {DATA_DIR_ENV} is unset")))?,
    };
    let entries = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut files = Vec::new();
    for e in entries {
        let p = e.map_err(|e| Error::io(&dir, e))?.path();
        if p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")) {
            files.push(p);
        }
    }
    if files.is_empty() {
        return Err(Error::EmptyInput(format!("no CSV files in {}", dir.display())));
    }
    Ok(choose_files(&files, cfg.data.max_files, seed::derive(cfg.seed, "files")))
}

pub fn ingest(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let mut out = StageOutcome::new("ingest");
    let taxonomy = LabelTaxonomy::ciciot2023();
    let schema = Arc::new(FeatureSchema::ciciot_raw());
    let raw = match cfg.data.source {
        DataSource::Synthetic => {
            let s = seed::derive(cfg.seed, "synthetic");
            let flow = match cfg.data.synthetic_rows {
                Some(n) => FlowConfig::scaled(n, s),
                None => FlowConfig::subsample(s),
            };
            out.count("files", 0);
            ciciot_like(&flow)?
        }
        DataSource::Files => {
            let files = data_files(cfg)?;
            out.count("files", files.len());
            let tables = files
                .iter()
                .map(|f| load_csv(f, &schema, &taxonomy))
                .collect::<Result<Vec<RawTable>>>()?;
            RawTable::concat(tables)?
        }
    };
    out.count("raw_rows", raw.len());
    let (cleaned, report) = clean(&raw);
    out.count("dropped_nonfinite", report.dropped_nonfinite);
    out.count("dropped_duplicate", report.dropped_duplicate);
    if cleaned.is_empty() {
        return Err(Error::EmptyInput("no rows left after cleaning".into()));
    }
    let (x, _) = encode_labels(&cleaned, &taxonomy, LabelLevel::Subcategory)?;
    let stats = fit_standardizer(&x)?;
    let (x, kept) = drop_zero_variance(&standardize(&x, &stats)?, &stats)?;
    let names = schema.names();
    out.count("rows", x.n_rows());
    out.count("raw_width", schema.width());
    out.count("width", x.n_cols());

    let dir = stage_dir(&cfg.out_dir, "ingest")?;
    let labels: Vec<String> = cleaned.rows.iter().map(|r| r.label.clone()).collect();
    let csv_path = dir.join("clean.csv");
    write_matrix_csv(&csv_path, &x, &[("label", &labels)])?;
    let meta = DatasetMeta {
        format: META_FORMAT.to_string(),
        rows: x.n_rows(),
        features: x.schema().names().to_vec(),
        raw_width: schema.width(),
        dropped_columns: (0..schema.width()).filter(|j| !kept.contains(j)).map(|j| names[j].clone()).collect(),
        scaler: Some(ScalerMeta {
            features: names.to_vec(),
            means: stats.means.clone(),
            stds: stats.stds.clone(),
            n_fit: stats.n_fit,
        }),
        taxonomy: (&taxonomy).into(),
        seed: cfg.seed,
        counters: [
            ("raw_rows".to_string(), raw.len() as u64),
            ("dropped_nonfinite".to_string(), report.dropped_nonfinite as u64),
            ("dropped_duplicate".to_string(), report.dropped_duplicate as u64),
        ]
        .into_iter()
        .collect(),
        synthetic_rows: Vec::new(),
    };
    let meta_path = dir.join("clean.meta.toml");
    write_toml(&meta_path, &meta)?;
    out.artifacts = vec![csv_path, meta_path];
    Ok(out)
}

// ---- balance ----

/// A persisted split half: features, binary labels, class names and
/// synthetic-row flags.
pub struct SplitPart {
    pub x: FeatureMatrix,
    pub y: LabelVector,
    pub classes: Vec<String>,
    pub synthetic: Vec<bool>,
}

pub fn load_part(path: &Path) -> Result<SplitPart> {
    let (x, extra) = read_matrix_csv(path, &["label", "binary", "synthetic"])?;
    let ids = extra["binary"]
        .iter()
        .map(|s| {
            s.parse::<u32>()
                .map_err(|_| Error::Schema(format!("{}: bad binary label `{s}`", path.display())))
        })
        .collect::<Result<Vec<u32>>>()?;
    Ok(SplitPart {
        x,
        y: LabelVector::binary(ids)?,
        classes: extra["label"].clone(),
        synthetic: extra["synthetic"].iter().map(|s| s == "1").collect(),
    })
}

fn write_part(path: &Path, x: &FeatureMatrix, classes: &LabelVector, binary: &LabelVector, synthetic: &[bool]) -> Result<()> {
    let names: Vec<String> = (0..classes.len()).map(|i| classes.name_of(i).to_string()).collect();
    let bin: Vec<String> = binary.ids().iter().map(|b| b.to_string()).collect();
    let syn: Vec<String> = synthetic.iter().map(|&b| flag(b)).collect();
    write_matrix_csv(path, x, &[("label", &names), ("binary", &bin), ("synthetic", &syn)])
}

pub fn balance(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let mut out = StageOutcome::new("balance");
    let src = cfg.out_dir.join("ingest");
    let (x, extra) = read_matrix_csv(&src.join("clean.csv"), &["label"])?;
    let meta: DatasetMeta = read_toml(&src.join("clean.meta.toml"))?;
    let taxonomy = meta.taxonomy.to_taxonomy()?;
    let class_names = taxonomy.names_at(LabelLevel::Class);
    let ids = extra["label"]
        .iter()
        .map(|l| {
            let c = taxonomy
                .name_at(l, LabelLevel::Class)
                .ok_or_else(|| Error::UnknownLabel(vec![l.clone()]))?;
            Ok(class_names.iter().position(|n| *n == c).expect("class list is complete") as u32)
        })
        .collect::<Result<Vec<u32>>>()?;
    let classes = LabelVector::new(LabelLevel::Class, ids, class_names)?;

    let plan = if cfg.balance.targets.is_empty() {
        BalancePlan::ciciot_default(&taxonomy)
    } else {
        BalancePlan::new(LabelLevel::Class, cfg.balance.targets.clone())?
    };
    plan.validate(&taxonomy)?;
    let params = SmoteParams {
        k: cfg.balance.k,
        seed: seed::derive(cfg.seed, "smote"),
        clamp_k: cfg.balance.clamp_k,
    };
    let split_seed = seed::derive(cfg.seed, "split");
    let (train, test, counts): ((FeatureMatrix, LabelVector, Vec<bool>), (FeatureMatrix, LabelVector, Vec<bool>), Vec<GroupCount>) =
        match cfg.mode {
            Mode::Faithful => {
                let b = apply_plan(&x, &classes, &plan, &params)?;
                let flags = b.synthetic_flags();
                let s = split(&b.x, &b.labels, cfg.split.ratio, split_seed, cfg.split.stratify)?;
                let pick = |idx: &[usize]| idx.iter().map(|&i| flags[i]).collect::<Vec<bool>>();
                (
                    (s.train.0, s.train.1, pick(&s.train_indices)),
                    (s.test.0, s.test.1, pick(&s.test_indices)),
                    b.counts,
                )
            }
            Mode::LeakageSafe => {
                let s = split(&x, &classes, cfg.split.ratio, split_seed, cfg.split.stratify)?;
                let b = apply_plan(&s.train.0, &s.train.1, &plan, &params)?;
                let flags = b.synthetic_flags();
                let n_test = s.test.0.n_rows();
                ((b.x, b.labels, flags), (s.test.0, s.test.1, vec![false; n_test]), b.counts)
            }
        };

    let dir = stage_dir(&cfg.out_dir, "balance")?;
    let mut artifacts = Vec::new();
    for (name, (px, pc, flags)) in [("train.csv", &train), ("test.csv", &test)] {
        let path = dir.join(name);
        write_part(&path, px, pc, &binarize(pc, &taxonomy)?, flags)?;
        artifacts.push(path);
    }
    let rows: Vec<Vec<String>> = counts
        .iter()
        .map(|c| vec![c.group.clone(), c.before.to_string(), c.after.to_string(), c.synthetic.to_string()])
        .collect();
    let counts_path = dir.join("counts.csv");
    write_table(&counts_path, &["group", "before", "after", "synthetic"], &rows)?;
    artifacts.push(counts_path);

    let total: usize = counts.iter().map(|c| c.after).sum();
    out.count("mode", serde_json::to_value(cfg.mode).expect("enum"));
    out.count("balanced_rows", total);
    out.count("synthetic_rows", counts.iter().map(|c| c.synthetic).sum::<usize>());
    out.count("train_rows", train.0.n_rows());
    out.count("test_rows", test.0.n_rows());
    out.count("synthetic_in_test", test.2.iter().filter(|&&b| b).count());
    out.artifacts = artifacts;
    Ok(out)
}

// ---- train / evaluate ----

fn model_path(out: &Path, kind: ModelKind) -> PathBuf {
    out.join("train").join(format!("{kind}.model"))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    deserialize(&text)
}

pub fn train_stage(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let mut out = StageOutcome::new("train");
    let part = load_part(&cfg.out_dir.join("balance").join("train.csv"))?;
    let params = cfg.models.params(cfg.seed);
    stage_dir(&cfg.out_dir, "train")?;
    for &kind in &cfg.models.kinds {
        eprintln!("[explia] training {kind} on {} rows", part.x.n_rows());
        let model = train(kind, &part.x, &part.y, &params)?;
        let path = model_path(&cfg.out_dir, kind);
        write_text(&path, &serialize(&model))?;
        out.artifacts.push(path);
    }
    out.count("models", cfg.models.kinds.len());
    out.count("train_rows", part.x.n_rows());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model: ModelKind,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateSummary {
    pub models: Vec<ModelScore>,
    /// Highest test accuracy; ties go to GBT, then RF, then KNN.
    pub selected: ModelKind,
}

/// Argmax accuracy with the fixed priority order on ties.
pub fn select_model(scores: &[ModelScore]) -> Option<ModelKind> {
    let best = scores.iter().map(|s| s.metrics.accuracy).fold(f64::NEG_INFINITY, f64::max);
    ModelKind::PRIORITY
        .into_iter()
        .find(|k| scores.iter().any(|s| s.model == *k && s.metrics.accuracy == best))
}

pub fn evaluate(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let mut out = StageOutcome::new("evaluate");
    let test = load_part(&cfg.out_dir.join("balance").join("test.csv"))?;
    let mut scores = Vec::new();
    for &kind in &cfg.models.kinds {
        let model = load_model(&model_path(&cfg.out_dir, kind))?;
        scores.push(ModelScore {
            model: kind,
            metrics: model.evaluate(&test.x, &test.y)?,
        });
    }
    let selected = select_model(&scores).ok_or_else(|| Error::Selection("no models to evaluate".into()))?;
    let dir = stage_dir(&cfg.out_dir, "evaluate")?;
    let rows: Vec<Vec<String>> = scores
        .iter()
        .map(|s| {
            let m = &s.metrics;
            let c = m.confusion;
            vec![
                s.model.to_string(),
                m.accuracy.to_string(),
                m.precision.to_string(),
                m.recall.to_string(),
                m.f1.to_string(),
                c[0][0].to_string(),
                c[0][1].to_string(),
                c[1][0].to_string(),
                c[1][1].to_string(),
                flag(s.model == selected),
            ]
        })
        .collect();
    let csv_path = dir.join("metrics.csv");
    write_table(
        &csv_path,
        &["model", "accuracy", "precision", "recall", "f1", "tn", "fp", "fn", "tp", "selected"],
        &rows,
    )?;
    let json_path = dir.join("metrics.json");
    for s in &scores {
        out.count(&format!("{}_accuracy", s.model), s.metrics.accuracy);
    }
    out.count("selected", selected.name());
    out.count("test_rows", test.x.n_rows());
    write_json(&json_path, &EvaluateSummary { models: scores, selected })?;
    out.artifacts = vec![csv_path, json_path];
    Ok(out)
}

pub fn load_evaluation(out: &Path) -> Result<EvaluateSummary> {
    read_json(&out.join("evaluate").join("metrics.json"))
}

// ---- explain ----

/// Gain for tree models, permutation importance for KNN.
fn model_importance(cfg: &PipelineConfig, model: &TrainedModel, test: &SplitPart) -> Result<RankingSource> {
    let kind = model.kind();
    Ok(match model {
        TrainedModel::Knn(_) => RankingSource::new(
            format!("{kind}_permutation"),
            importance_permutation(
                model,
                &test.x,
                &test.y,
                cfg.explain.permutation_repeats,
                seed::derive(cfg.seed, "permutation"),
            )?,
        ),
        _ => RankingSource::new(format!("{kind}_gain"), importance_gain(model)?),
    })
}

pub fn explain(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let mut out = StageOutcome::new("explain");
    let train_part = load_part(&cfg.out_dir.join("balance").join("train.csv"))?;
    let test = load_part(&cfg.out_dir.join("balance").join("test.csv"))?;
    let selected = load_evaluation(&cfg.out_dir)?.selected;
    let model = load_model(&model_path(&cfg.out_dir, selected))?;
    let names = model.feature_names().to_vec();
    for &row in &cfg.explain.samples {
        if row >= test.x.n_rows() {
            return Err(Error::Selection(format!(
                "sample row {row} is out of range (test set has {} rows)",
                test.x.n_rows()
            )));
        }
    }

    let bg = sample_background(&train_part.x, cfg.explain.background, seed::derive(cfg.seed, "background"));
    let eval = if cfg.explain.global_rows == 0 {
        test.x.clone()
    } else {
        sample_background(&test.x, cfg.explain.global_rows, seed::derive(cfg.seed, "global-rows"))
    };
    let method = default_method(&model, cfg.explain.n_permutations, seed::derive(cfg.seed, "shap"));
    eprintln!("[explia] global SHAP for {selected} over {} rows", eval.n_rows());
    let (global, _) = shap_global(&model, &eval, &bg, method, cfg.explain.significance_floor)?;

    let mut sources = Vec::new();
    for &kind in &cfg.models.kinds {
        let m = load_model(&model_path(&cfg.out_dir, kind))?;
        sources.push(model_importance(cfg, &m, &test)?);
    }
    sources.push(RankingSource::new("shap", global.to_importance()));

    let dir = stage_dir(&cfg.out_dir, "explain")?;
    let mut artifacts = Vec::new();
    let imp_rows: Vec<Vec<String>> = (0..names.len())
        .map(|j| {
            let mut r = vec![names[j].clone()];
            r.extend(sources.iter().map(|s| s.importance.scores[j].to_string()));
            r
        })
        .collect();
    let mut header = vec!["feature"];
    header.extend(sources.iter().map(|s| s.label.as_str()));
    let p = dir.join("importance.csv");
    write_table(&p, &header, &imp_rows)?;
    artifacts.push(p);
    let p = dir.join("importance.json");
    write_json(&p, &sources)?;
    artifacts.push(p);

    let shap_rows: Vec<Vec<String>> = global
        .ranking
        .iter()
        .enumerate()
        .map(|(r, &j)| {
            vec![
                (r + 1).to_string(),
                names[j].clone(),
                global.mean_abs[j].to_string(),
                global.mean_abs_by_class[0][j].to_string(),
                global.mean_abs_by_class[1][j].to_string(),
                flag(global.significant.contains(&j)),
            ]
        })
        .collect();
    let p = dir.join("shap_global.csv");
    write_table(
        &p,
        &["rank", "feature", "mean_abs", "mean_abs_benign", "mean_abs_attack", "significant"],
        &shap_rows,
    )?;
    artifacts.push(p);

    let lime_master = seed::derive(cfg.seed, "lime");
    let mut samples = Vec::new();
    for &row in &cfg.explain.samples {
        let x = test.x.row(row);
        let shap = explain_instance(&model, x, &bg, method, row as u64)?;
        let force = force_breakdown(&shap, &names, x)?;
        let lime = lime_explain(
            &model,
            x,
            None,
            &LimeParams {
                seed: seed::derive_indexed(lime_master, "sample", row as u64),
                ..cfg.explain.lime.clone()
            },
        )?;
        let mut force_rows = vec![vec!["0".into(), "base_value".into(), String::new(), String::new(), force.base.to_string()]];
        force_rows.extend(force.entries.iter().enumerate().map(|(i, e)| {
            vec![
                (i + 1).to_string(),
                e.name.clone(),
                e.value.to_string(),
                e.phi.to_string(),
                e.cumulative.to_string(),
            ]
        }));
        let p = dir.join(format!("sample_{row}_force.csv"));
        write_table(&p, &["step", "feature", "value", "phi", "cumulative"], &force_rows)?;
        artifacts.push(p);
        let lime_rows: Vec<Vec<String>> = lime
            .features
            .iter()
            .map(|f| {
                vec![
                    names[f.index].clone(),
                    f.value.to_string(),
                    f.weight.to_string(),
                    f.contribution().to_string(),
                ]
            })
            .collect();
        let p = dir.join(format!("sample_{row}_lime.csv"));
        write_table(&p, &["feature", "value", "weight", "contribution"], &lime_rows)?;
        artifacts.push(p);
        samples.push(json!({
            "row": row,
            "class": test.classes[row],
            "actual": test.y.ids()[row],
            "predicted": crate::models::Model::predict_class_row(&model, x),
            "shap": shap,
            "force": force,
            "lime": lime,
        }));
    }

    let p = dir.join("explain.json");
    write_json(
        &p,
        &json!({
            "model": selected,
            "method": method,
            "background_rows": bg.n_rows(),
            "global": global,
            "samples": samples,
        }),
    )?;
    artifacts.push(p);
    out.count("model", selected.name());
    out.count("global_rows", eval.n_rows());
    out.count("significant_features", global.significant.len());
    out.count("samples", cfg.explain.samples.len());
    out.artifacts = artifacts;
    Ok(out)
}

// ---- agree ----

pub fn agree(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let mut out = StageOutcome::new("agree");
    let train_part = load_part(&cfg.out_dir.join("balance").join("train.csv"))?;
    let test = load_part(&cfg.out_dir.join("balance").join("test.csv"))?;
    let selected = load_evaluation(&cfg.out_dir)?.selected;
    let model = load_model(&model_path(&cfg.out_dir, selected))?;
    let sources: Vec<RankingSource> = read_json(&cfg.out_dir.join("explain").join("importance.json"))?;

    let n = test.x.n_rows();
    let mut rows: Vec<usize> = if cfg.agree.n_samples >= n {
        (0..n).collect()
    } else {
        rand::seq::index::sample(&mut seed::rng(seed::derive(cfg.seed, "agree-rows")), n, cfg.agree.n_samples).into_vec()
    };
    rows.sort_unstable();
    let bg = sample_background(&train_part.x, cfg.explain.background, seed::derive(cfg.seed, "background"));
    let acfg = AgreementConfig {
        local_k: cfg.agree.local_k,
        ranking_ks: cfg.agree.ranking_ks.clone(),
        n_permutations: cfg.explain.n_permutations,
        lime: cfg.explain.lime.clone(),
        seed: seed::derive(cfg.seed, "agree"),
    };
    eprintln!("[explia] cross-checking SHAP and LIME on {} rows", rows.len());
    let report = agreement_report(&model, &test.x.select_rows(&rows), &rows, &bg, sources, &acfg)?;

    let dir = stage_dir(&cfg.out_dir, "agree")?;
    let p = dir.join("agreement.json");
    write_text(&p, &(report.to_json() + "\n"))?;
    out.artifacts.push(p);
    if let Some(lime) = report
        .rankings
        .as_ref()
        .and_then(|r| r.sources.iter().find(|s| s.label == "lime"))
    {
        let names = model.feature_names();
        let mut scores = vec![0.0; names.len()];
        for (f, s) in lime.ranking.iter().zip(&lime.scores) {
            let j = names.iter().position(|n| n == f).expect("ranking uses model features");
            scores[j] = *s;
        }
        let p = dir.join("lime_importance.json");
        write_json(&p, &ImportanceVector::new(ImportanceMethod::LimeGlobal, names.to_vec(), scores)?)?;
        out.artifacts.push(p);
    }
    let s = &report.summary;
    out.count("samples", s.n_samples);
    for (k, v) in [
        ("shap_model_rate", s.shap_model_rate),
        ("lime_model_rate", s.lime_model_rate),
        ("shap_lime_rate", s.shap_lime_rate),
        ("mean_overlap", s.mean_overlap),
    ] {
        out.count(k, v.map_or(Value::Null, Value::from));
    }
    Ok(out)
}

// ---- rfe ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeSummary {
    pub model: ModelKind,
    pub score_on: ScoreOn,
    /// Test accuracy of the selected model on all features.
    pub baseline_accuracy: f64,
    /// Test accuracy after retraining on the best set.
    pub final_accuracy: f64,
    pub initial_features: usize,
    pub best_features: Vec<String>,
    pub trace: RfeTrace,
}

pub fn rfe(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let mut out = StageOutcome::new("rfe");
    let train_part = load_part(&cfg.out_dir.join("balance").join("train.csv"))?;
    let test = load_part(&cfg.out_dir.join("balance").join("test.csv"))?;
    let eval = load_evaluation(&cfg.out_dir)?;
    let kind = eval.selected;
    let baseline_accuracy = eval
        .models
        .iter()
        .find(|s| s.model == kind)
        .map(|s| s.metrics.accuracy)
        .expect("selected model was evaluated");
    let params = cfg.models.params(cfg.seed);
    let trainer = |x: &FeatureMatrix, y: &LabelVector| train(kind, x, y, &params);
    let rcfg = cfg.rfe.rfe_config(cfg.seed);

    let initial = if cfg.rfe.xai_seed {
        let explain_dir = cfg.out_dir.join("explain");
        let all: Vec<RankingSource> = read_json(&explain_dir.join("importance.json"))?;
        let mut picked: Vec<ImportanceVector> = all
            .into_iter()
            .filter(|s| s.label == "shap" || s.label.starts_with(&format!("{kind}_")))
            .map(|s| s.importance)
            .collect();
        let lime_path = cfg.out_dir.join("agree").join("lime_importance.json");
        if lime_path.exists() {
            picked.push(read_json(&lime_path)?);
        }
        let refs: Vec<&ImportanceVector> = picked.iter().collect();
        Some(xai_guided_seed(&refs, cfg.rfe.xai_top_m)?)
    } else {
        None
    };

    eprintln!("[explia] feature elimination with {kind}");
    let (trace, _) = match cfg.rfe.score_on {
        ScoreOn::Validation => {
            let s = split(
                &train_part.x,
                &train_part.y,
                1.0 - cfg.rfe.validation_ratio,
                seed::derive(cfg.seed, "rfe-validation"),
                true,
            )?;
            rfe_run(&trainer, (&s.train.0, &s.train.1), (&s.test.0, &s.test.1), initial.as_deref(), &rcfg)?
        }
        ScoreOn::Test => rfe_run(&trainer, (&train_part.x, &train_part.y), (&test.x, &test.y), initial.as_deref(), &rcfg)?,
    };
    let cols = resolve_features(&train_part.x, &trace.best_features)?;
    let refined = trainer(&train_part.x.select_columns(&cols), &train_part.y)?;
    let final_accuracy = refined.evaluate(&test.x.select_columns(&cols), &test.y)?.accuracy;

    let dir = stage_dir(&cfg.out_dir, "rfe")?;
    let trace_rows: Vec<Vec<String>> = trace
        .iterations
        .iter()
        .map(|it| {
            vec![
                it.iteration.to_string(),
                serde_json::to_value(it.step).expect("enum").as_str().unwrap_or_default().to_string(),
                it.features.len().to_string(),
                it.removed.join(";"),
                it.score.to_string(),
                flag(it.accepted),
            ]
        })
        .collect();
    let p = dir.join("trace.csv");
    write_table(&p, &["iteration", "step", "n_features", "removed", "score", "accepted"], &trace_rows)?;
    out.artifacts.push(p);
    let p = dir.join("features.txt");
    write_text(&p, &(trace.best_features.join("\n") + "\n"))?;
    out.artifacts.push(p);
    let p = dir.join("refined.model");
    write_text(&p, &serialize(&refined))?;
    out.artifacts.push(p);

    out.count("model", kind.name());
    out.count("iterations", trace.iterations.len());
    out.count("best_features", trace.best_features.len());
    out.count("baseline_accuracy", baseline_accuracy);
    out.count("final_accuracy", final_accuracy);
    let summary = RfeSummary {
        model: kind,
        score_on: cfg.rfe.score_on,
        baseline_accuracy,
        final_accuracy,
        initial_features: initial.as_ref().map_or(train_part.x.n_cols(), Vec::len),
        best_features: trace.best_features.clone(),
        trace,
    };
    let p = dir.join("rfe.json");
    write_json(&p, &summary)?;
    out.artifacts.push(p);
    Ok(out)
}

pub fn load_rfe(out: &Path) -> Result<RfeSummary> {
    read_json(&out.join("rfe").join("rfe.json"))
}
