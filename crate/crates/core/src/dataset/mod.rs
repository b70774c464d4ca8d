//! Flow-record ingestion: schema and taxonomy, CSV loading, cleaning, label
//! encoding, standardization, zero-variance removal and train/test splits.

mod io;
mod matrix;
mod prep;
mod raw;
mod schema;

pub use io::{read_matrix_csv, read_toml, write_matrix_csv, write_toml, DatasetMeta, ScalerMeta, TaxonomyMeta, META_FORMAT};
pub use matrix::{FeatureMatrix, LabelVector, ScalerStats};
pub use prep::{drop_zero_variance, fit_standardizer, split, standardize, DatasetSplit};
pub use raw::{choose_files, clean, encode_labels, load_csv, write_raw_csv, CleanReport, RawRow, RawTable};
pub use schema::{
    FeatureSchema, LabelLevel, LabelTaxonomy, BINARY_NAMES, CICIOT_CONSTANT_FEATURES, CICIOT_FEATURES, LABEL_COLUMN,
};
