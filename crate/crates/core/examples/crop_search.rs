//! Bayesian-optimized crop search compared with an exhaustive grid.
//!
//! cargo run --release --example crop_search [out_dir]

use scenic::crop::{crop_score, grid_search, optimize_crop, save_annotated, BoConfig, GridSpec, Phase};
use scenic::mlp::{Dense, Mlp};
use scenic::{FeaturizerSpec, ImageGrid, ScorerModel};

fn main() -> scenic::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("scenic-examples"), Into::into);
    std::fs::create_dir_all(&out).map_err(|e| scenic::Error::Io { path: out.clone(), source: e })?;

    // expected score grows with the share of green pixels
    let mut weights = vec![0.0; 110];
    weights[9 * 11 + 4] = 8.0;
    let mut bias = vec![0.0; 10];
    bias[0] = 4.0;
    let model = ScorerModel::new(
        Mlp::from_layers(vec![Dense { in_dim: 11, out_dim: 10, weights, bias }])?,
        FeaturizerSpec::ColorNames,
    )?;

    let mut image = ImageGrid::filled(80, 60, [200, 40, 40])?;
    image.fill_rect(44, 8, 74, 38, [0, 128, 0]);
    let spec = *model.featurizer();
    let objective = |r: &scenic::crop::CropRect| crop_score(&model, &spec, &image, r);

    let bo = optimize_crop(objective, &BoConfig { seed: 3, ..BoConfig::default() })?;
    let (grid_rect, grid_score) = grid_search(objective, &GridSpec::default())?;
    let initial = bo.trace.iter().filter(|t| t.phase == Phase::Initial).count();
    println!("full image     {:.3}", bo.full_score);
    println!("BO ({} evals, {initial} initial) {:.3} at {:?}", bo.trace.len(), bo.score, bo.rect);
    println!("grid (16384)   {grid_score:.3} at {grid_rect:?}");

    save_annotated(&image, &bo.rect, &out.join("crop_annotated.png"))?;
    println!("wrote {}", out.join("crop_annotated.png").display());
    Ok(())
}
