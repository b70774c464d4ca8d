//! SHAP/LIME agreement on a problem whose informative columns are known.

use explia::consistency::{agreement_report, AgreementConfig};
use explia::explain::{sample_background, LimeParams};
use explia::models::{train_gbt, GbtParams, TrainedModel};
use explia::synth::planted;

#[test]
fn shap_and_lime_share_most_of_their_top_five_on_planted_data() {
    let pl = planted(2000, 5, 15, 3).unwrap();
    let model = TrainedModel::Gbt(train_gbt(&pl.x, &pl.y, &GbtParams { seed: 4, ..Default::default() }).unwrap());
    let rows: Vec<usize> = (0..100).collect();
    let samples = pl.x.select_rows(&rows);
    let bg = sample_background(&pl.x, 100, 5);
    let config = AgreementConfig {
        local_k: 5,
        lime: LimeParams::default(),
        seed: 6,
        ..Default::default()
    };
    let report = agreement_report(&model, &samples, &rows, &bg, Vec::new(), &config).unwrap();
    assert_eq!(report.summary.n_samples, 100);
    assert_eq!(report.summary.shap_model_rate, Some(1.0));
    let overlap = report.summary.mean_overlap.unwrap();
    assert!(overlap >= 0.6, "mean top-5 overlap {overlap}");
}
