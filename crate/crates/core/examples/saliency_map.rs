//! Occlusion saliency for a scorer that only looks at the top-left quadrant.
//! Writes the map and its binary mask as PNGs.
//!
//! cargo run --release --example saliency_map [out_dir]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scenic::mlp::{Dense, Mlp};
use scenic::saliency::{binarize, occlusion_saliency, SaliencyConfig, MASK_THRESHOLD};
use scenic::{Featurizer, FeaturizerSpec, ImageGrid, ScorerModel};

fn main() -> scenic::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("scenic-examples"), Into::into);
    std::fs::create_dir_all(&out).map_err(|e| scenic::Error::Io { path: out.clone(), source: e })?;

    // gray pixels in the top-left quadrant lower the odds of a 10
    let spec = FeaturizerSpec::ColorNamesSpatial { grid: 2 };
    let mut weights = vec![0.0; 10 * spec.dim()];
    weights[9 * spec.dim() + 3] = -6.0;
    let mut bias = vec![0.0; 10];
    bias[9] = 3.0;
    let layer = Dense { in_dim: spec.dim(), out_dim: 10, weights, bias };
    let model = ScorerModel::new(Mlp::from_layers(vec![layer])?, spec)?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let palette = [[0, 0, 255], [0, 128, 0], [255, 0, 0], [255, 255, 0]];
    let image = ImageGrid::from_fn(96, 64, |_, _| palette[rng.random_range(0..palette.len())])?;

    let map = occlusion_saliency(&model, &spec, &image, &SaliencyConfig::default())?;
    let mask = binarize(&map, MASK_THRESHOLD);
    println!("lattice {}x{}, argmax cell {:?}, {} salient cells", map.cols, map.rows, map.argmax(), mask.count());

    image.save_png(&out.join("saliency_input.png"))?;
    map.save_png(&out.join("saliency_map.png"))?;
    mask.save_png(&out.join("saliency_mask.png"), image.width(), image.height())?;
    println!("wrote {}", out.display());
    Ok(())
}
