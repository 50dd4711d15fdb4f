//! Train one scorer per loss on synthetic data and compare them on held-out
//! images: nDCG, K-S pass rate and threshold-7 AUC.
//!
//! cargo run --release --example train_scorer

use std::path::Path;

use scenic::data_io::{synth_generate, SynthSpec};
use scenic::metrics::{evaluate, EvalConfig, EvalItem};
use scenic::scorer::{train, Example};
use scenic::{FeaturizerSpec, LossKind, TrainConfig};

fn main() -> scenic::Result<()> {
    let spec = SynthSpec {
        n_samples: 700,
        heteroscedastic: true,
        tau: 2.0,
        tau_min: 0.5,
        seed: 1,
        ..SynthSpec::default()
    };
    let (manifest, _) = synth_generate(&spec)?;
    let samples = manifest.geo_samples(None, Path::new("."))?;
    let (train_set, test_set) = samples.split_at(500);
    let examples: Vec<Example> = train_set
        .iter()
        .map(|s| Example { features: s.ground_features.clone(), ratings: s.ratings })
        .collect();
    let items: Vec<EvalItem> = test_set
        .iter()
        .map(|s| EvalItem { id: s.id.clone(), features: s.ground_features.clone(), ratings: s.ratings })
        .collect();

    println!("{:<13} {:>6} {:>8} {:>8} {:>7}", "loss", "best", "nDCG", "K-S", "AUC");
    for kind in LossKind::ALL {
        let config = TrainConfig { loss_kind: kind, learning_rate: 0.05, epochs: 100, seed: 1, ..TrainConfig::default() };
        let (model, report) = train(&examples, FeaturizerSpec::Passthrough { dim: spec.ground_dim }, &config)?;
        let eval = evaluate(&items, |i| model.predict(&i.features), &EvalConfig { min_ratings: 5, seed: 1, ..EvalConfig::default() })?;
        println!(
            "{:<13} {:>6} {:>8.4} {:>8.3} {:>7}",
            kind.name(),
            report.best_epoch,
            eval.mean_ndcg,
            eval.ks_pass_rate,
            eval.auc.map_or("-".into(), |a| format!("{a:.3}"))
        );
    }
    Ok(())
}
