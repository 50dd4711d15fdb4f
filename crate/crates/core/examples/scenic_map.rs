//! Dense maps from sparse ground samples: 1NN, LWA and the cross-view hybrid.
//!
//! cargo run --release --example scenic_map [out_dir]

use scenic::data_io::{synth_generate, SynthSpec};
use scenic::geomap::{
    cvh_training_set, rasterize, train_cvh, train_overhead_scorer, CvhConfig, GroundIndex, MapMethod, MapPredictor,
    MapSpec, OverheadInput,
};
use scenic::scorer::{train, Example};
use scenic::{FeaturizerSpec, TrainConfig};

fn main() -> scenic::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("scenic-examples"), Into::into);
    std::fs::create_dir_all(&out).map_err(|e| scenic::Error::Io { path: out.clone(), source: e })?;

    let spec = SynthSpec { n_samples: 500, seed: 2, ..SynthSpec::default() };
    let (manifest, truth) = synth_generate(&spec)?;
    let samples = manifest.geo_samples(None, &out)?;
    let examples: Vec<Example> = samples
        .iter()
        .map(|s| Example { features: s.ground_features.clone(), ratings: s.ratings })
        .collect();
    let config = TrainConfig { learning_rate: 0.05, epochs: 100, seed: 2, ..TrainConfig::default() };
    let (ground, _) = train(&examples, FeaturizerSpec::Passthrough { dim: spec.ground_dim }, &config)?;
    let index = GroundIndex::from_samples(&samples, &ground)?;

    let (overhead, _) = train_overhead_scorer(&samples, &ground, &config)?;
    let overhead = OverheadInput::Distribution(overhead);
    let cvh_config = CvhConfig { seed: 2, ..CvhConfig::default() };
    let fused = cvh_training_set(&samples, &index, &overhead, cvh_config.k, cvh_config.sigma)?;
    let (cvh, report) = train_cvh(&fused, overhead, &cvh_config)?;
    println!("CVH best epoch {} of {}", report.best_epoch, cvh_config.epochs);

    let map = MapSpec { bbox: spec.bbox, cell_deg: 0.002 };
    for (name, method) in [("1nn", MapMethod::Nearest), ("lwa", MapMethod::Lwa), ("cvh", MapMethod::Cvh)] {
        let predictor = MapPredictor {
            method,
            index: &index,
            sigma: cvh_config.sigma,
            cvh: Some(&cvh),
            overhead: Some(&truth),
            overhead_scorer: None,
        };
        let raster = rasterize(&predictor, &map)?;
        raster.save_png(&out.join(format!("map_{name}.png")))?;
        raster.save_sidecar(&out.join(format!("map_{name}.json")))?;
        let (lo, hi) = raster.valid_range().unwrap_or((f64::NAN, f64::NAN));
        println!("{name}: {}x{} cells, scores {lo:.2}..{hi:.2}", raster.rows, raster.cols);
    }
    println!("wrote {}", out.display());
    Ok(())
}
