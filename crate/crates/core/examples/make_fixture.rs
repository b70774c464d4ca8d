//! Writes the bundled test fixture: a seeded flow table with the CICIoT2023
//! schema and a typical subsample class mix.
//!
//! cargo run --example make_fixture -- crates/core/tests/fixtures/flows.csv

use std::path::PathBuf;

use explia::dataset::write_raw_csv;
use explia::synth::{ciciot_like, FlowConfig};

const FIXTURE_SEED: u64 = 2023;

fn main() {
    let path = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("crates/core/tests/fixtures/flows.csv"));
    let table = ciciot_like(&FlowConfig::subsample(FIXTURE_SEED)).expect("generator config is valid");
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).expect("create fixture directory");
    }
    write_raw_csv(&path, &table).expect("write fixture");
    eprintln!("wrote {} rows to {}", table.len(), path.display());
}
