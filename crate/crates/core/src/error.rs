use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("unknown label(s): {}", .0.join(", "))]
    UnknownLabel(Vec<String>),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("stratification error: label `{label}` has {count} row(s), need at least 2")]
    Stratification { label: String, count: usize },

    #[error("cannot interpolate group `{group}`: {count} row(s), SMOTE needs at least 2")]
    CannotInterpolate { group: String, count: usize },

    #[error("degenerate labels: only class {0} present (set allow_constant to train a constant model)")]
    DegenerateLabels(u8),

    #[error("method mismatch: {0}")]
    MethodMismatch(String),

    #[error("exact Shapley budget exceeded: {features} features > {max}; use the tree or sampling explainer")]
    Budget { features: usize, max: usize },

    #[error("model document version mismatch: found {found}, expected {expected}")]
    Version { found: String, expected: String },

    #[error("corrupt model document at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },

    #[error("kernel width {width} gives degenerate sample weights; try a larger width")]
    KernelWidth { width: f64 },

    #[error("instance mismatch: explanations were computed for different rows")]
    InstanceMismatch,

    #[error("selection error: {0}")]
    Selection(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}:{line}: {source}")]
    AtLine {
        path: PathBuf,
        line: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("rfe iteration {iteration}: {source}")]
    Rfe {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
