//! Pipeline configuration, read from a TOML file.
//!
//! Every key has a default, so an empty file is a valid config. Unknown
//! keys are rejected. Relative paths inside the file resolve against the
//! file's directory.
//!
//! ```toml
//! seed = 42
//! out_dir = "out"
//! workers = 0              # 0 = one per core
//! mode = "faithful"        # or "leakage_safe"
//!
//! [data]
//! source = "files"         # or "synthetic"
//! dir = "data"             # falls back to $EXPLIA_DATA_DIR
//! max_files = 18
//!
//! [balance]
//! k = 5
//!
//! [models]
//! kinds = ["gbt", "rf", "knn"]
//! ```
//!
//! Stage seeds are derived from the master `seed`; per-model `seed` keys
//! are overwritten with the derived values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::consistency::DEFAULT_TOP_KS;
use crate::error::{Error, Result};
use crate::explain::{LimeParams, DEFAULT_SIGNIFICANCE_FLOOR};
use crate::models::{GbtParams, KnnParams, ModelKind, ModelParams, RfParams};
use crate::rfe::{ImportanceSource, RfeConfig};
use crate::seed;

pub const DATA_DIR_ENV: &str = "EXPLIA_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Balance the whole dataset, then split (synthetic rows reach the test set).
    Faithful,
    /// Split first and balance only the training part.
    LeakageSafe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Files,
    /// Seeded flow generator with the CICIoT2023 schema.
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub source: DataSource,
    pub dir: Option<PathBuf>,
    /// Explicit shard list; overrides `dir`.
    pub files: Vec<PathBuf>,
    /// Seeded choice of this many shards from `dir`.
    pub max_files: Option<usize>,
    /// Row count for the synthetic source (class mix of a typical subsample).
    pub synthetic_rows: Option<usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Files,
            dir: None,
            files: Vec::new(),
            max_files: None,
            synthetic_rows: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BalanceConfig {
    /// Class-level targets; empty means 2100 benign and 300 per attack class.
    pub targets: BTreeMap<String, usize>,
    pub k: usize,
    pub clamp_k: bool,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self {
            targets: BTreeMap::new(),
            k: 5,
            clamp_k: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    /// Train fraction.
    pub ratio: f64,
    pub stratify: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            ratio: 0.8,
            stratify: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelsConfig {
    pub kinds: Vec<ModelKind>,
    pub gbt: GbtParams,
    pub rf: RfParams,
    pub knn: KnnParams,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        Self {
            kinds: ModelKind::PRIORITY.to_vec(),
            gbt: GbtParams::default(),
            rf: RfParams::default(),
            knn: KnnParams::default(),
        }
    }
}

impl ModelsConfig {
    /// Hyperparameters with model seeds derived from `master`.
    pub fn params(&self, master: u64) -> ModelParams {
        let mut p = ModelParams {
            gbt: self.gbt.clone(),
            rf: self.rf.clone(),
            knn: self.knn.clone(),
        };
        p.gbt.seed = seed::derive(master, "gbt");
        p.rf.seed = seed::derive(master, "rf");
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplainConfig {
    /// Background rows drawn from the training set.
    pub background: usize,
    /// Test rows summarized by global SHAP (0 = all).
    pub global_rows: usize,
    /// Permutations for the sampling explainer.
    pub n_permutations: usize,
    pub significance_floor: f64,
    /// Test-set row indices explained individually.
    pub samples: Vec<usize>,
    pub permutation_repeats: usize,
    pub lime: LimeParams,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            background: 100,
            global_rows: 500,
            n_permutations: 200,
            significance_floor: DEFAULT_SIGNIFICANCE_FLOOR,
            samples: vec![0, 1],
            permutation_repeats: 3,
            lime: LimeParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgreeConfig {
    /// Test rows cross-checked (seeded choice; 0 = none).
    pub n_samples: usize,
    pub local_k: usize,
    pub ranking_ks: Vec<usize>,
}

impl Default for AgreeConfig {
    fn default() -> Self {
        Self {
            n_samples: 100,
            local_k: 5,
            ranking_ks: DEFAULT_TOP_KS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreOn {
    /// A validation fold carved from the training set.
    Validation,
    /// The test set (selection leaks into the reported score).
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RfeStageConfig {
    pub score_on: ScoreOn,
    /// Validation share of the training set when `score_on = "validation"`.
    pub validation_ratio: f64,
    /// Start from the union of top features of gain, SHAP and LIME.
    pub xai_seed: bool,
    pub xai_top_m: usize,
    pub min_features: usize,
    pub tolerance: f64,
    pub batch_drop_zero: bool,
    pub importance_source: ImportanceSource,
    pub shap_rows: usize,
    pub shap_background: usize,
    pub permutation_repeats: usize,
}

impl Default for RfeStageConfig {
    fn default() -> Self {
        let r = RfeConfig::default();
        Self {
            score_on: ScoreOn::Validation,
            validation_ratio: 0.2,
            xai_seed: true,
            xai_top_m: r.xai_top_m,
            min_features: r.min_features,
            tolerance: r.tolerance,
            batch_drop_zero: r.batch_drop_zero,
            importance_source: r.importance_source,
            shap_rows: r.shap_rows,
            shap_background: r.shap_background,
            permutation_repeats: r.permutation_repeats,
        }
    }
}

impl RfeStageConfig {
    pub fn rfe_config(&self, master: u64) -> RfeConfig {
        RfeConfig {
            min_features: self.min_features,
            tolerance: self.tolerance,
            batch_drop_zero: self.batch_drop_zero,
            importance_source: self.importance_source,
            xai_top_m: self.xai_top_m,
            shap_rows: self.shap_rows,
            shap_background: self.shap_background,
            permutation_repeats: self.permutation_repeats,
            seed: seed::derive(master, "rfe"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads for parallel stages; 0 = one per core.
    pub workers: usize,
    pub mode: Mode,
    pub data: DataConfig,
    pub balance: BalanceConfig,
    pub split: SplitConfig,
    pub models: ModelsConfig,
    pub explain: ExplainConfig,
    pub agree: AgreeConfig,
    pub rfe: RfeStageConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            out_dir: PathBuf::from("out"),
            workers: 0,
            mode: Mode::Faithful,
            data: DataConfig::default(),
            balance: BalanceConfig::default(),
            split: SplitConfig::default(),
            models: ModelsConfig::default(),
            explain: ExplainConfig::default(),
            agree: AgreeConfig::default(),
            rfe: RfeStageConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.out_dir);
        if let Some(d) = cfg.data.dir.as_mut() {
            resolve(d);
        }
        cfg.data.files.iter_mut().for_each(resolve);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.split.ratio > 0.0 && self.split.ratio < 1.0) {
            return bad(format!("split.ratio = {} must be in (0, 1)", self.split.ratio));
        }
        if !(self.rfe.validation_ratio > 0.0 && self.rfe.validation_ratio < 1.0) {
            return bad(format!("rfe.validation_ratio = {} must be in (0, 1)", self.rfe.validation_ratio));
        }
        if self.models.kinds.is_empty() {
            return bad("models.kinds is empty".into());
        }
        if self.balance.k == 0 {
            return bad("balance.k must be >= 1".into());
        }
        if self.explain.background == 0 {
            return bad("explain.background must be >= 1".into());
        }
        if self.data.source == DataSource::Synthetic && self.data.synthetic_rows == Some(0) {
            return bad("data.synthetic_rows must be >= 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(PipelineConfig::parse("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = PipelineConfig::default();
        c.models.kinds = vec![ModelKind::Rf];
        c.models.gbt.n_trees = 7;
        c.rfe.min_features = 3;
        assert_eq!(PipelineConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_errors() {
        for text in ["bogus = 1", "[data]\nsauce = \"files\"", "[models.gbt]\ntrees = 3", "[rfe]\nmin_feature = 2"] {
            assert!(matches!(PipelineConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn nested_keys_parse() {
        let c = PipelineConfig::parse(
            "mode = \"leakage_safe\"\n[models]\nkinds = [\"knn\"]\n[models.knn]\nk = 3\n[rfe]\nmin_features = 2\nscore_on = \"test\"\n",
        )
        .unwrap();
        assert_eq!(c.mode, Mode::LeakageSafe);
        assert_eq!(c.models.knn.k, 3);
        assert_eq!(c.rfe.min_features, 2);
        assert_eq!(c.rfe.score_on, ScoreOn::Test);
    }
}
