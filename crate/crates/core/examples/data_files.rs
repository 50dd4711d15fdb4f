//! Synthetic manifests, their CSV/JSON forms, and versioned model files.
//!
//! cargo run --example data_files [out_dir]

use scenic::data_io::{load_manifest, load_model, save_manifest, save_model, synth_generate, SynthSpec};
use scenic::{FeaturizerSpec, ScorerModel};

fn main() -> scenic::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("scenic-examples"), Into::into);
    std::fs::create_dir_all(&out).map_err(|e| scenic::Error::Io { path: out.clone(), source: e })?;

    let (manifest, field) = synth_generate(&SynthSpec { n_samples: 5, n_bumps: 2, seed: 9, ..SynthSpec::default() })?;
    let csv = out.join("manifest.csv");
    save_manifest(&manifest, &csv)?;
    save_manifest(&manifest, &out.join("manifest.json"))?;
    assert_eq!(load_manifest(&csv)?, manifest);
    print!("{}", manifest.to_csv_string());

    for r in &manifest.records {
        println!("{}: field {:.3}, mean rating {:.2}", r.id, field.scenicness(r.lat, r.lon), r.ratings.mean_rating()?);
    }

    let model = ScorerModel::random(FeaturizerSpec::Passthrough { dim: 8 }, &[16], 9)?;
    let path = out.join("scorer.json");
    save_model(&model, &path)?;
    let back: ScorerModel = load_model(&path)?;
    assert_eq!(back, model);
    println!("model {:?} round-tripped through {}", back.layer_dims(), path.display());
    Ok(())
}
