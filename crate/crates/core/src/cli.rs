//! Command-line front end. [`run`] parses arguments, executes one
//! subcommand, and returns the process exit code.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 I/O error,
//! 4 numerical failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::crop::{optimal_crop, save_annotated, BoConfig, CropSummary};
use crate::data_io::{
    load_model, save_model, synth_generate, write_versioned_json, Manifest, SynthField, SynthSpec, FIELD_KIND,
};
use crate::error::{Error, Result};
use crate::featurize::{FeaturizerSpec, ImageGrid};
use crate::geomap::{
    cvh_training_set, rasterize, train_cvh, train_overhead_scorer, BBox, CvhConfig, CvhModel, GeoSample, GroundIndex,
    MapMethod, MapPredictor, MapSpec, OverheadInput, OverheadSource, SampleOverhead, DEFAULT_SIGMA_DEG,
};
use crate::metrics::{evaluate, EvalConfig, EvalItem};
use crate::saliency::{binarize, occlusion_saliency, SaliencyConfig, SaliencyMetric, MASK_THRESHOLD};
use crate::scorer::{train, Example, LossKind, ScorerModel, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "scenic", version, about = "Scenicness rating distributions, saliency, crops and maps")]
pub struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Never changes outputs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic manifest and its ground-truth field.
    Synth(SynthArgs),
    /// Train a ground-level scorer.
    Train(TrainArgs),
    /// Train a cross-view hybrid mapping network.
    TrainCvh(TrainCvhArgs),
    /// Evaluate a scorer (or a synthetic field oracle) on a manifest.
    Eval(EvalArgs),
    /// Occlusion saliency map and binary mask for one image.
    Saliency(SaliencyArgs),
    /// Search for the highest-scoring crop of one image.
    Crop(CropArgs),
    /// Rasterize a scenicness map over a bounding box.
    Map(MapArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// SynthSpec JSON; omitted fields take defaults. Its seed is replaced by --seed.
    #[arg(long)]
    pub spec: PathBuf,
    /// Manifest path (.csv or .json).
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth field JSON (default: <out stem>.truth.json).
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "multinomial")]
    pub loss: String,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 40)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.10)]
    pub validation_fraction: f64,
    /// Comma-separated hidden layer widths; empty for a linear model.
    #[arg(long, default_value = "32")]
    pub hidden: String,
    /// Image featurizer when the manifest lists images: color_names or color_names_spatial:G.
    #[arg(long, default_value = "color_names")]
    pub featurizer: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Epoch-loss report (default: <out stem>.report.json).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainCvhArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Ground scorer that supplies neighbor predictions.
    #[arg(long)]
    pub model: PathBuf,
    /// distribution (overhead scorer output) or features (raw overhead features).
    #[arg(long, default_value = "distribution")]
    pub overhead_input: String,
    #[arg(long, default_value_t = crate::geomap::DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_SIGMA_DEG)]
    pub sigma: f64,
    #[arg(long, default_value_t = crate::geomap::CVH_L2)]
    pub l2: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.03)]
    pub lr: f64,
    /// Epochs and learning rate of the overhead scorer.
    #[arg(long, default_value_t = 100)]
    pub overhead_epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub overhead_lr: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Scorer model JSON, or a synthetic field truth JSON to evaluate the generating distribution.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub min_ratings: u32,
    #[arg(long, default_value_t = 10_000)]
    pub mc_samples: usize,
    #[arg(long, default_value_t = 7.0)]
    pub auc_threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SaliencyArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Mask step in lattice cells.
    #[arg(long, default_value_t = 1)]
    pub stride: u32,
    #[arg(long, default_value_t = 32)]
    pub lattice: u32,
    #[arg(long, default_value_t = 7)]
    pub mask: u32,
    #[arg(long, default_value_t = MASK_THRESHOLD)]
    pub threshold: f64,
    /// argmax_probability or total_variation.
    #[arg(long, default_value = "argmax_probability")]
    pub metric: String,
    /// map.png,mask.png
    #[arg(long)]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct CropArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub bo_iters: usize,
    #[arg(long, default_value_t = 10)]
    pub bo_init: usize,
    #[arg(long, default_value_t = 0.3)]
    pub min_width: f64,
    #[arg(long, default_value_t = 0.3)]
    pub min_height: f64,
    /// crop.json,annotated.png
    #[arg(long)]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// 1nn, lwa, cvh or overhead.
    #[arg(long)]
    pub method: String,
    /// min_lat,min_lon,max_lat,max_lon
    #[arg(long, allow_hyphen_values = true)]
    pub bbox: String,
    #[arg(long)]
    pub cell_deg: f64,
    /// Ground scorer.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub cvh_model: Option<PathBuf>,
    /// Overhead scorer for --method overhead (default: the one inside --cvh-model).
    #[arg(long)]
    pub overhead_model: Option<PathBuf>,
    /// Synthetic field truth JSON supplying dense overhead features (cvh only);
    /// without it, cells use the overhead features of a manifest sample inside them.
    #[arg(long)]
    pub overhead_field: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SIGMA_DEG)]
    pub sigma: f64,
    /// Also write per-cell values as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// map.png,map.json
    #[arg(long)]
    pub out: String,
}

/// Maps an error to its exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } | Error::Image(_) => EXIT_IO,
        Error::Diverged { .. } => EXIT_NUMERIC,
        _ => EXIT_CONFIG,
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point for the binary.
pub fn main() -> i32 {
    run(std::env::args_os())
}

fn execute(cli: &Cli) -> Result<()> {
    let seed = cli.seed.ok_or_else(|| Error::config("--seed is required"))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::config("--threads must be >= 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let out = Outputs::new(cli.out_dir.as_deref())?;
    pool.install(|| match &cli.command {
        Command::Synth(a) => cmd_synth(a, seed, &out),
        Command::Train(a) => cmd_train(a, seed, &out),
        Command::TrainCvh(a) => cmd_train_cvh(a, seed, &out),
        Command::Eval(a) => cmd_eval(a, seed, &out),
        Command::Saliency(a) => cmd_saliency(a, &out),
        Command::Crop(a) => cmd_crop(a, seed, &out),
        Command::Map(a) => cmd_map(a, &out),
    })
}

/// Resolves output paths against --out-dir.
struct Outputs {
    dir: Option<PathBuf>,
}

impl Outputs {
    fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        Ok(Self { dir: dir.map(Path::to_path_buf) })
    }

    fn path(&self, p: &Path) -> PathBuf {
        match &self.dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Splits `a,b` into two resolved paths.
    fn pair(&self, spec: &str, what: &str) -> Result<(PathBuf, PathBuf)> {
        match spec.split(',').map(str::trim).collect::<Vec<_>>()[..] {
            [a, b] if !a.is_empty() && !b.is_empty() => Ok((self.path(Path::new(a)), self.path(Path::new(b)))),
            _ => Err(Error::config(format!("--out expects {what}, got {spec:?}"))),
        }
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_hidden(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().map_err(|e| Error::config(format!("--hidden {t:?}: {e}"))))
        .collect()
}

fn parse_featurizer(s: &str) -> Result<FeaturizerSpec> {
    let spec = match s.split_once(':') {
        None if s == "color_names" => FeaturizerSpec::ColorNames,
        Some(("color_names_spatial", g)) => FeaturizerSpec::ColorNamesSpatial {
            grid: g.parse().map_err(|e| Error::config(format!("--featurizer grid {g:?}: {e}")))?,
        },
        _ => return Err(Error::config(format!("unknown featurizer {s:?}"))),
    };
    spec.validate()?;
    Ok(spec)
}

fn manifest_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn load_samples(path: &Path, featurizer: Option<&FeaturizerSpec>) -> Result<Vec<GeoSample>> {
    let manifest = Manifest::load(path)?;
    if manifest.is_empty() {
        return Err(Error::invalid(format!("manifest {} has no records", path.display())));
    }
    let f = featurizer.filter(|f| !matches!(f, FeaturizerSpec::Passthrough { .. }));
    manifest.geo_samples(f.map(|f| f as &dyn crate::featurize::Featurizer), manifest_dir(path))
}

fn cmd_synth(a: &SynthArgs, seed: u64, out: &Outputs) -> Result<()> {
    let text = read_text(&a.spec)?;
    let mut spec: SynthSpec =
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", a.spec.display())))?;
    spec.seed = seed;
    let (manifest, field) = synth_generate(&spec)?;
    let path = out.path(&a.out);
    let truth = out.path(&a.truth.clone().unwrap_or_else(|| sibling(&a.out, ".truth.json")));
    manifest.save(&path)?;
    std::fs::write(&truth, field.to_json_string()).map_err(|e| Error::io(&truth, e))?;
    eprintln!("wrote {} ({} records) and {}", path.display(), manifest.len(), truth.display());
    Ok(())
}

fn cmd_train(a: &TrainArgs, seed: u64, out: &Outputs) -> Result<()> {
    let loss: LossKind = a.loss.parse()?;
    let image_featurizer = parse_featurizer(&a.featurizer)?;
    let config = TrainConfig {
        loss_kind: loss,
        learning_rate: a.lr,
        batch_size: a.batch_size,
        epochs: a.epochs,
        validation_fraction: a.validation_fraction,
        seed,
        hidden_dims: parse_hidden(&a.hidden)?,
    };
    config.validate()?;
    let manifest = Manifest::load(&a.manifest)?;
    if manifest.is_empty() {
        return Err(Error::invalid(format!("manifest {} has no records", a.manifest.display())));
    }
    let uses_features = manifest.records.iter().all(|r| r.ground_features.is_some());
    let samples = manifest.geo_samples(Some(&image_featurizer), manifest_dir(&a.manifest))?;
    let featurizer = if uses_features {
        FeaturizerSpec::Passthrough { dim: samples[0].ground_features.dim() }
    } else {
        image_featurizer
    };
    let examples: Vec<Example> = samples
        .into_iter()
        .map(|s| Example { features: s.ground_features, ratings: s.ratings })
        .collect();
    let (model, report) = train(&examples, featurizer, &config)?;
    let path = out.path(&a.out);
    let report_path = out.path(&a.report.clone().unwrap_or_else(|| sibling(&a.out, ".report.json")));
    save_model(&model, &path)?;
    write_versioned_json(&report, &report_path)?;
    eprintln!("best epoch {} of {}; wrote {}", report.best_epoch, a.epochs, path.display());
    Ok(())
}

fn cmd_train_cvh(a: &TrainCvhArgs, seed: u64, out: &Outputs) -> Result<()> {
    let ground: ScorerModel = load_model(&a.model)?;
    let samples = load_samples(&a.manifest, Some(ground.featurizer()))?;
    let overhead = match a.overhead_input.as_str() {
        "distribution" => {
            let cfg = TrainConfig { learning_rate: a.overhead_lr, epochs: a.overhead_epochs, seed, ..TrainConfig::default() };
            OverheadInput::Distribution(train_overhead_scorer(&samples, &ground, &cfg)?.0)
        }
        "features" => {
            let dim = samples[0]
                .overhead_features
                .as_ref()
                .ok_or_else(|| Error::invalid("manifest has no overhead features"))?
                .dim();
            OverheadInput::Features { dim }
        }
        other => return Err(Error::config(format!("unknown overhead input {other:?}"))),
    };
    let config = CvhConfig {
        k: a.k,
        sigma: a.sigma,
        l2: a.l2,
        learning_rate: a.lr,
        epochs: a.epochs,
        seed,
        ..CvhConfig::default()
    };
    let index = GroundIndex::from_samples(&samples, &ground)?;
    let fused = cvh_training_set(&samples, &index, &overhead, config.k, config.sigma)?;
    let (model, report) = train_cvh(&fused, overhead, &config)?;
    let path = out.path(&a.out);
    let report_path = out.path(&a.report.clone().unwrap_or_else(|| sibling(&a.out, ".report.json")));
    save_model(&model, &path)?;
    write_versioned_json(&report, &report_path)?;
    eprintln!("best epoch {}; wrote {}", report.best_epoch, path.display());
    Ok(())
}

/// A scorer, or the generating distribution of a synthetic field.
enum Evaluated {
    Scorer(ScorerModel),
    Oracle(Box<SynthField>),
}

fn load_evaluated(path: &Path) -> Result<Evaluated> {
    let text = read_text(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Corrupt(e.to_string()))?;
    if value.get("kind").and_then(|k| k.as_str()) == Some(FIELD_KIND) {
        Ok(Evaluated::Oracle(Box::new(SynthField::from_json_str(&text)?)))
    } else {
        Ok(Evaluated::Scorer(crate::data_io::model_from_str(&text)?))
    }
}

fn cmd_eval(a: &EvalArgs, seed: u64, out: &Outputs) -> Result<()> {
    let model = load_evaluated(&a.model)?;
    let featurizer = match &model {
        Evaluated::Scorer(m) => Some(*m.featurizer()),
        Evaluated::Oracle(_) => None,
    };
    let samples = load_samples(&a.manifest, featurizer.as_ref())?;
    let locations: std::collections::HashMap<&str, (f64, f64)> =
        samples.iter().map(|s| (s.id.as_str(), (s.lat, s.lon))).collect();
    let items: Vec<EvalItem> = samples
        .iter()
        .map(|s| EvalItem { id: s.id.clone(), features: s.ground_features.clone(), ratings: s.ratings })
        .collect();
    let config = EvalConfig {
        mc_samples: a.mc_samples,
        seed,
        min_ratings: a.min_ratings,
        auc_threshold: a.auc_threshold,
    };
    let report = evaluate(
        &items,
        |item| match &model {
            Evaluated::Scorer(m) => m.predict(&item.features),
            Evaluated::Oracle(f) => {
                let (lat, lon) = locations[item.id.as_str()];
                f.rating_distribution(lat, lon)
            }
        },
        &config,
    )?;
    let path = out.path(&a.out);
    write_versioned_json(&report, &path)?;
    eprintln!(
        "{} images: mean nDCG {:.4}, K-S pass rate {:.3}; wrote {}",
        report.per_image.len(),
        report.mean_ndcg,
        report.ks_pass_rate,
        path.display()
    );
    Ok(())
}

fn image_model(path: &Path) -> Result<ScorerModel> {
    let model: ScorerModel = load_model(path)?;
    if let FeaturizerSpec::Passthrough { .. } = model.featurizer() {
        return Err(Error::config("model reads precomputed features and cannot score images"));
    }
    Ok(model)
}

fn cmd_saliency(a: &SaliencyArgs, out: &Outputs) -> Result<()> {
    let (map_path, mask_path) = out.pair(&a.out, "map.png,mask.png")?;
    let metric = match a.metric.as_str() {
        "argmax_probability" => SaliencyMetric::ArgmaxProbability,
        "total_variation" => SaliencyMetric::TotalVariation,
        other => return Err(Error::config(format!("unknown saliency metric {other:?}"))),
    };
    let model = image_model(&a.model)?;
    let image = ImageGrid::load_png(&a.image)?;
    let config = SaliencyConfig {
        lattice: a.lattice,
        mask_cells: a.mask,
        stride_cells: a.stride,
        metric,
        ..SaliencyConfig::default()
    };
    let map = occlusion_saliency(&model, model.featurizer(), &image, &config)?;
    let mask = binarize(&map, a.threshold);
    map.save_png(&map_path)?;
    mask.save_png(&mask_path, image.width(), image.height())?;
    eprintln!("{} of {} cells salient; wrote {}", mask.count(), map.values.len(), map_path.display());
    Ok(())
}

fn cmd_crop(a: &CropArgs, seed: u64, out: &Outputs) -> Result<()> {
    let (json_path, png_path) = out.pair(&a.out, "crop.json,annotated.png")?;
    let model = image_model(&a.model)?;
    let image = ImageGrid::load_png(&a.image)?;
    let config = BoConfig {
        init_samples: a.bo_init,
        iterations: a.bo_iters,
        min_width: a.min_width,
        min_height: a.min_height,
        seed,
        ..BoConfig::default()
    };
    let result = optimal_crop(&model, model.featurizer(), &image, &config)?;
    write_versioned_json(&CropSummary::from(&result), &json_path)?;
    save_annotated(&image, &result.rect, &png_path)?;
    eprintln!("crop score {:.4} (full image {:.4})", result.score, result.full_score);
    Ok(())
}

fn cmd_map(a: &MapArgs, out: &Outputs) -> Result<()> {
    let (png_path, json_path) = out.pair(&a.out, "map.png,map.json")?;
    let method: MapMethod = a.method.parse()?;
    let bbox: BBox = a.bbox.parse()?;
    let spec = MapSpec { bbox, cell_deg: a.cell_deg };
    spec.validate()?;
    let cvh: Option<CvhModel> = match (method, &a.cvh_model) {
        (MapMethod::Cvh, None) => return Err(Error::config("--method cvh requires --cvh-model")),
        (MapMethod::Cvh | MapMethod::Overhead, Some(p)) => Some(load_model(p)?),
        _ => None,
    };
    let overhead_scorer: Option<ScorerModel> = a.overhead_model.as_deref().map(load_model).transpose()?;
    let ground: ScorerModel = load_model(&a.model)?;
    let samples = load_samples(&a.manifest, Some(ground.featurizer()))?;
    let index = GroundIndex::from_samples(&samples, &ground)?;
    let field = a.overhead_field.as_deref().map(|p| SynthField::from_json_str(&read_text(p)?)).transpose()?;
    let sparse = SampleOverhead::new(&samples);
    let overhead: &dyn OverheadSource = match &field {
        Some(f) => f,
        None => &sparse,
    };
    let predictor = MapPredictor {
        method,
        index: &index,
        sigma: a.sigma,
        cvh: cvh.as_ref(),
        overhead: Some(overhead),
        overhead_scorer: overhead_scorer.as_ref(),
    };
    let raster = rasterize(&predictor, &spec)?;
    raster.save_png(&png_path)?;
    raster.save_sidecar(&json_path)?;
    if let Some(csv) = &a.csv {
        raster.save_csv(&out.path(csv))?;
    }
    eprintln!("{}x{} raster; wrote {}", raster.rows, raster.cols, png_path.display());
    Ok(())
}
