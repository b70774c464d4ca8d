//! Explainable intrusion detection on network-flow records.
//!
//! The pipeline: ingest and clean flow CSVs ([`dataset`]), rebalance with
//! SMOTE and binarize ([`balance`]), train gradient-boosted trees, a random
//! forest and KNN ([`models`]), explain predictions with Shapley values and
//! LIME ([`explain`]), measure agreement between importance sources
//! ([`consistency`]) and refine the feature set by recursive elimination
//! ([`rfe`]). [`cli`] wires the stages to a config file.

pub mod balance;
pub mod cli;
pub mod consistency;
pub mod dataset;
pub mod error;
pub mod explain;
pub mod models;
pub mod rfe;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
