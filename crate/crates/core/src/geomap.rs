//! Dense scenicness maps from sparse geotagged predictions.
//!
//! Three predictors are provided: the nearest ground sample (1NN), a
//! Gaussian-kernel weighted average of ground predictions (LWA), and the
//! cross-view hybrid network (CVH) that fuses overhead features at the query
//! with the predictions and kernel-weighted distances of the `k` nearest
//! ground samples. Distances are Euclidean in degrees.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::FeatureVector;
use crate::mlp::{self, Mlp, Sample, TrainConfig, TrainReport};
use crate::ratings::{RatingHistogram, ScoreDistribution, LEVELS};
use crate::scorer::{LossKind, ScorerModel};

/// Kernel width used by LWA and the CVH distance features, in degrees.
pub const DEFAULT_SIGMA_DEG: f64 = 0.01;
/// Neighbors fed to the CVH network.
pub const DEFAULT_K: usize = 5;
/// Hidden widths of the CVH network.
pub const CVH_HIDDEN: [usize; 3] = [100, 50, 25];
/// L2 weight of the CVH objective.
pub const CVH_L2: f64 = 0.5;

/// A geotagged, rated ground image with its features.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoSample {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub ratings: RatingHistogram,
    pub ground_features: FeatureVector,
    pub overhead_features: Option<FeatureVector>,
}

pub fn check_coordinates(lat: f64, lon: f64) -> Result<()> {
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return Err(Error::invalid(format!("coordinates ({lat}, {lon}) out of range")));
    }
    Ok(())
}

/// Euclidean distance in degree space.
pub fn degree_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

pub fn gaussian_weight(distance: f64, sigma: f64) -> f64 {
    (-(distance * distance) / (2.0 * sigma * sigma)).exp()
}

/// A ground sample's location and predicted distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundPoint {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub prediction: ScoreDistribution,
}

/// Ground predictions indexed for neighbor queries (linear scan).
#[derive(Debug, Clone, PartialEq)]
pub struct GroundIndex {
    points: Vec<GroundPoint>,
}

/// One neighbor of a query.
#[derive(Debug, Clone, Copy)]
pub struct Neighbor<'a> {
    pub point: &'a GroundPoint,
    pub distance: f64,
}

impl GroundIndex {
    pub fn new(points: Vec<GroundPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("no ground samples"));
        }
        for p in &points {
            check_coordinates(p.lat, p.lon)?;
        }
        Ok(Self { points })
    }

    /// Applies the ground scorer to every sample.
    pub fn from_samples(samples: &[GeoSample], scorer: &ScorerModel) -> Result<Self> {
        let points = samples
            .par_iter()
            .map(|s| {
                Ok(GroundPoint {
                    id: s.id.clone(),
                    lat: s.lat,
                    lon: s.lon,
                    prediction: scorer.predict(&s.ground_features)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(points)
    }

    pub fn points(&self) -> &[GroundPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` nearest points ordered by `(distance, id)`, skipping `exclude`.
    pub fn nearest(&self, lat: f64, lon: f64, k: usize, exclude: Option<&str>) -> Vec<Neighbor<'_>> {
        let mut all: Vec<Neighbor<'_>> = self
            .points
            .iter()
            .filter(|p| Some(p.id.as_str()) != exclude)
            .map(|p| Neighbor {
                point: p,
                distance: degree_distance((lat, lon), (p.lat, p.lon)),
            })
            .collect();
        let cmp = |a: &Neighbor<'_>, b: &Neighbor<'_>| {
            a.distance
                .total_cmp(&b.distance)
                .then_with(|| a.point.id.cmp(&b.point.id))
        };
        if k < all.len() {
            all.select_nth_unstable_by(k, cmp);
            all.truncate(k);
        }
        all.sort_by(cmp);
        all
    }

    /// Prediction of the nearest sample (ties to the smallest id).
    pub fn nn_predict(&self, lat: f64, lon: f64) -> ScoreDistribution {
        self.nearest(lat, lon, 1, None)[0].point.prediction
    }

    /// Gaussian-kernel weighted average of all predictions; falls back to
    /// 1NN when the weights underflow.
    pub fn lwa_predict(&self, lat: f64, lon: f64, sigma: f64) -> Result<ScoreDistribution> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::config(format!("sigma {sigma} must be > 0")));
        }
        let mut acc = [0.0; LEVELS];
        let mut total = 0.0;
        for p in &self.points {
            let w = gaussian_weight(degree_distance((lat, lon), (p.lat, p.lon)), sigma);
            total += w;
            acc.iter_mut().zip(p.prediction.probs()).for_each(|(a, q)| *a += w * q);
        }
        if total < 1e-300 {
            return Ok(self.nn_predict(lat, lon));
        }
        let sum: f64 = acc.iter().sum();
        ScoreDistribution::new(acc.map(|a| a / sum))
    }
}

/// Free-function form of [`GroundIndex::nn_predict`].
pub fn nn_predict(index: &GroundIndex, lat: f64, lon: f64) -> ScoreDistribution {
    index.nn_predict(lat, lon)
}

/// Free-function form of [`GroundIndex::lwa_predict`].
pub fn lwa_predict(index: &GroundIndex, lat: f64, lon: f64, sigma: f64) -> Result<ScoreDistribution> {
    index.lwa_predict(lat, lon, sigma)
}

/// `[overhead || for each of the k nearest: prediction (10) || exp(-d^2 / 2 sigma^2)]`.
pub fn assemble_cvh_input(
    index: &GroundIndex,
    lat: f64,
    lon: f64,
    overhead: &[f64],
    k: usize,
    sigma: f64,
    exclude: Option<&str>,
) -> Result<Vec<f64>> {
    if k == 0 || !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::config("k must be >= 1 and sigma > 0"));
    }
    let neighbors = index.nearest(lat, lon, k, exclude);
    if neighbors.len() < k {
        return Err(Error::invalid(format!(
            "{} ground samples available, {k} neighbors required",
            neighbors.len()
        )));
    }
    let mut out = Vec::with_capacity(overhead.len() + k * (LEVELS + 1));
    out.extend_from_slice(overhead);
    for n in neighbors {
        out.extend_from_slice(n.point.prediction.probs());
        out.push(gaussian_weight(n.distance, sigma));
    }
    Ok(out)
}

/// What the CVH network receives from the overhead view.
#[derive(Debug, Clone, PartialEq)]
pub enum OverheadInput {
    /// Raw overhead feature vectors of the given dimension.
    Features { dim: usize },
    /// The distribution predicted by an overhead scorer.
    Distribution(ScorerModel),
}

impl OverheadInput {
    pub fn dim(&self) -> usize {
        match self {
            OverheadInput::Features { dim } => *dim,
            OverheadInput::Distribution(_) => LEVELS,
        }
    }

    /// Converts raw overhead features into the network's overhead block.
    pub fn encode(&self, raw: &FeatureVector) -> Result<Vec<f64>> {
        match self {
            OverheadInput::Features { dim } => {
                if raw.dim() != *dim {
                    return Err(Error::DimMismatch {
                        expected: *dim,
                        actual: raw.dim(),
                    });
                }
                Ok(raw.as_slice().to_vec())
            }
            OverheadInput::Distribution(scorer) => Ok(scorer.predict(raw)?.probs().to_vec()),
        }
    }
}

/// Trained cross-view hybrid network.
#[derive(Debug, Clone, PartialEq)]
pub struct CvhModel {
    pub net: Mlp,
    pub k: usize,
    pub sigma: f64,
    pub l2: f64,
    pub overhead: OverheadInput,
}

impl CvhModel {
    pub fn input_dim(&self) -> usize {
        self.overhead.dim() + self.k * (LEVELS + 1)
    }

    /// Checks that the network input matches the fusion layout.
    pub fn validate(&self) -> Result<()> {
        if self.net.input_dim() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                actual: self.net.input_dim(),
            });
        }
        Ok(())
    }

    /// Predicted distribution at a location given its raw overhead features.
    pub fn predict_at(&self, index: &GroundIndex, lat: f64, lon: f64, overhead: &FeatureVector) -> Result<ScoreDistribution> {
        let block = self.overhead.encode(overhead)?;
        let fused = assemble_cvh_input(index, lat, lon, &block, self.k, self.sigma, None)?;
        cvh_predict(self, &fused)
    }
}

pub fn cvh_predict(model: &CvhModel, fused: &[f64]) -> Result<ScoreDistribution> {
    model.net.predict(fused)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvhConfig {
    pub k: usize,
    pub sigma: f64,
    pub l2: f64,
    pub hidden_dims: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for CvhConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            sigma: DEFAULT_SIGMA_DEG,
            l2: CVH_L2,
            hidden_dims: CVH_HIDDEN.to_vec(),
            learning_rate: 0.03,
            batch_size: 40,
            epochs: 100,
            validation_fraction: 0.10,
            seed: 0,
        }
    }
}

impl CvhConfig {
    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            loss_kind: LossKind::Multinomial,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            validation_fraction: self.validation_fraction,
            seed: self.seed,
            hidden_dims: self.hidden_dims.clone(),
        }
    }
}

/// A fused CVH input with the ratings observed at its location.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedExample {
    pub input: Vec<f64>,
    pub ratings: RatingHistogram,
}

/// Fused training inputs for every sample, neighbors drawn from `index`
/// with the sample itself left out.
pub fn cvh_training_set(
    samples: &[GeoSample],
    index: &GroundIndex,
    overhead: &OverheadInput,
    k: usize,
    sigma: f64,
) -> Result<Vec<FusedExample>> {
    samples
        .par_iter()
        .map(|s| {
            let raw = s
                .overhead_features
                .as_ref()
                .ok_or_else(|| Error::invalid(format!("sample {:?} has no overhead features", s.id)))?;
            let block = overhead.encode(raw)?;
            Ok(FusedExample {
                input: assemble_cvh_input(index, s.lat, s.lon, &block, k, sigma, Some(&s.id))?,
                ratings: s.ratings,
            })
        })
        .collect()
}

/// Minimizes the summed multinomial loss plus `l2 * ||W||^2` by seeded SGD.
pub fn train_cvh(examples: &[FusedExample], overhead: OverheadInput, config: &CvhConfig) -> Result<(CvhModel, TrainReport)> {
    if examples.is_empty() {
        return Err(Error::invalid("CVH training set is empty"));
    }
    if config.k == 0 || !(config.sigma > 0.0 && config.sigma.is_finite()) || !(config.l2 >= 0.0 && config.l2.is_finite()) {
        return Err(Error::config("CVH needs k >= 1, sigma > 0, l2 >= 0"));
    }
    let train = config.train_config();
    train.validate()?;
    let input_dim = overhead.dim() + config.k * (LEVELS + 1);
    let samples = examples
        .iter()
        .map(|e| {
            Ok(Sample {
                input: &e.input,
                target: LossKind::Multinomial.target(&e.ratings)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rng = mlp::rng_from_seed(config.seed);
    let dims: Vec<usize> = std::iter::once(input_dim)
        .chain(config.hidden_dims.iter().copied())
        .chain(std::iter::once(LEVELS))
        .collect();
    let init = Mlp::glorot(&dims, &mut rng)?;
    let (net, report) = mlp::fit(init, &samples, &train, config.l2, &mut rng)?;
    Ok((
        CvhModel {
            net,
            k: config.k,
            sigma: config.sigma,
            l2: config.l2,
            overhead,
        },
        report,
    ))
}

/// Trains an overhead scorer from overhead features, warm-started from the
/// ground scorer when the feature dimensions agree.
pub fn train_overhead_scorer(
    samples: &[GeoSample],
    ground: &ScorerModel,
    config: &TrainConfig,
) -> Result<(ScorerModel, TrainReport)> {
    let examples = samples
        .iter()
        .map(|s| {
            Ok(crate::scorer::Example {
                features: s
                    .overhead_features
                    .clone()
                    .ok_or_else(|| Error::invalid(format!("sample {:?} has no overhead features", s.id)))?,
                ratings: s.ratings,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let dim = examples.first().map_or(0, |e| e.features.dim());
    if dim == ground.input_dim() {
        let mut init = ground.clone();
        if !matches!(init.featurizer(), crate::featurize::FeaturizerSpec::Passthrough { .. }) {
            init = ScorerModel::new(init.network().clone(), crate::featurize::FeaturizerSpec::Passthrough { dim })?;
        }
        crate::scorer::train_from(init, &examples, config)
    } else {
        crate::scorer::train(&examples, crate::featurize::FeaturizerSpec::Passthrough { dim }, config)
    }
}

/// Axis-aligned region in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BBox {
    pub fn validate(&self) -> Result<()> {
        check_coordinates(self.min_lat, self.min_lon)?;
        check_coordinates(self.max_lat, self.max_lon)?;
        if !(self.min_lat < self.max_lat && self.min_lon < self.max_lon) {
            return Err(Error::config(format!("degenerate bounding box {self:?}")));
        }
        Ok(())
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.min_lat + self.max_lat) / 2.0, (self.min_lon + self.max_lon) / 2.0)
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        (self.min_lat..=self.max_lat).contains(&lat) && (self.min_lon..=self.max_lon).contains(&lon)
    }
}

impl std::str::FromStr for BBox {
    type Err = Error;

    /// `min_lat,min_lon,max_lat,max_lon`
    fn from_str(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::config(format!("bbox {s:?}: {e}")))?;
        let [min_lat, min_lon, max_lat, max_lon] = v[..] else {
            return Err(Error::config(format!("bbox {s:?} needs four comma-separated numbers")));
        };
        let b = BBox { min_lat, min_lon, max_lat, max_lon };
        b.validate()?;
        Ok(b)
    }
}

/// Source of overhead features for arbitrary map locations.
pub trait OverheadSource: Sync {
    /// Overhead features for the cell centered at `(lat, lon)`, if available.
    fn features_at(&self, lat: f64, lon: f64, cell_deg: f64) -> Option<FeatureVector>;
}

/// Overhead features of the sample nearest the cell center, if one lies in the cell.
pub struct SampleOverhead<'a> {
    samples: &'a [GeoSample],
}

impl<'a> SampleOverhead<'a> {
    pub fn new(samples: &'a [GeoSample]) -> Self {
        Self { samples }
    }
}

impl OverheadSource for SampleOverhead<'_> {
    fn features_at(&self, lat: f64, lon: f64, cell_deg: f64) -> Option<FeatureVector> {
        let half = cell_deg / 2.0;
        self.samples
            .iter()
            .filter(|s| s.overhead_features.is_some() && (s.lat - lat).abs() <= half && (s.lon - lon).abs() <= half)
            .min_by(|a, b| {
                degree_distance((lat, lon), (a.lat, a.lon))
                    .total_cmp(&degree_distance((lat, lon), (b.lat, b.lon)))
                    .then_with(|| a.id.cmp(&b.id))
            })
            .and_then(|s| s.overhead_features.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapMethod {
    #[serde(rename = "1nn")]
    Nearest,
    Lwa,
    Cvh,
    /// Overhead scorer applied to the overhead features at the cell.
    Overhead,
}

impl std::str::FromStr for MapMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1nn" => Ok(MapMethod::Nearest),
            "lwa" => Ok(MapMethod::Lwa),
            "cvh" => Ok(MapMethod::Cvh),
            "overhead" => Ok(MapMethod::Overhead),
            other => Err(Error::config(format!("unknown map method {other:?}"))),
        }
    }
}

/// Everything a raster needs to predict one cell.
pub struct MapPredictor<'a> {
    pub method: MapMethod,
    pub index: &'a GroundIndex,
    pub sigma: f64,
    pub cvh: Option<&'a CvhModel>,
    pub overhead: Option<&'a dyn OverheadSource>,
    pub overhead_scorer: Option<&'a ScorerModel>,
}

impl MapPredictor<'_> {
    /// `Ok(None)` when the location lacks a required input.
    pub fn predict(&self, lat: f64, lon: f64, cell_deg: f64) -> Result<Option<ScoreDistribution>> {
        match self.method {
            MapMethod::Nearest => Ok(Some(self.index.nn_predict(lat, lon))),
            MapMethod::Lwa => self.index.lwa_predict(lat, lon, self.sigma).map(Some),
            MapMethod::Cvh => {
                let (model, source) = self.cvh_parts()?;
                match source.features_at(lat, lon, cell_deg) {
                    Some(f) => model.predict_at(self.index, lat, lon, &f).map(Some),
                    None => Ok(None),
                }
            }
            MapMethod::Overhead => {
                let (scorer, source) = self.overhead_parts()?;
                source.features_at(lat, lon, cell_deg).map(|f| scorer.predict(&f)).transpose()
            }
        }
    }

    fn overhead_parts(&self) -> Result<(&ScorerModel, &dyn OverheadSource)> {
        let scorer = self.overhead_scorer.or(match self.cvh.map(|m| &m.overhead) {
            Some(OverheadInput::Distribution(s)) => Some(s),
            _ => None,
        });
        match (scorer, self.overhead) {
            (Some(m), Some(s)) => Ok((m, s)),
            (None, _) => Err(Error::config("overhead mapping needs an overhead scorer")),
            (_, None) => Err(Error::config("overhead mapping needs an overhead feature source")),
        }
    }

    fn cvh_parts(&self) -> Result<(&CvhModel, &dyn OverheadSource)> {
        match (self.cvh, self.overhead) {
            (Some(m), Some(s)) => Ok((m, s)),
            (None, _) => Err(Error::config("CVH mapping needs a CVH model")),
            (_, None) => Err(Error::config("CVH mapping needs an overhead feature source")),
        }
    }
}

/// Grid geometry: row 0 is the northern edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub bbox: BBox,
    pub cell_deg: f64,
}

impl MapSpec {
    pub fn validate(&self) -> Result<()> {
        self.bbox.validate()?;
        if !(self.cell_deg > 0.0 && self.cell_deg.is_finite()) {
            return Err(Error::config("cell size must be > 0"));
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize) {
        let n = |span: f64| ((span / self.cell_deg - 1e-9).ceil() as usize).max(1);
        (n(self.bbox.max_lat - self.bbox.min_lat), n(self.bbox.max_lon - self.bbox.min_lon))
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.bbox.max_lat - (row as f64 + 0.5) * self.cell_deg,
            self.bbox.min_lon + (col as f64 + 0.5) * self.cell_deg,
        )
    }
}

/// Predicted weighted-average scores on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRaster {
    pub spec: MapSpec,
    pub rows: usize,
    pub cols: usize,
    /// Row-major; `None` marks cells without the inputs their predictor needs.
    pub values: Vec<Option<f64>>,
}

/// Sidecar metadata written next to a raster image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterSidecar {
    pub bbox: BBox,
    pub cell_size_deg: f64,
    pub rows: usize,
    pub cols: usize,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl MapRaster {
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.values[row * self.cols + col]
    }

    pub fn valid_range(&self) -> Option<(f64, f64)> {
        self.values.iter().flatten().fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }

    pub fn sidecar(&self) -> RasterSidecar {
        let range = self.valid_range();
        RasterSidecar {
            bbox: self.spec.bbox,
            cell_size_deg: self.spec.cell_deg,
            rows: self.rows,
            cols: self.cols,
            min: range.map(|r| r.0),
            max: range.map(|r| r.1),
        }
    }

    /// False-color RGBA image, one pixel per cell; invalid cells are transparent.
    pub fn to_rgba(&self) -> Vec<u8> {
        self.values
            .iter()
            .flat_map(|v| match v {
                Some(s) => {
                    let [r, g, b] = colormap(*s);
                    [r, g, b, 255]
                }
                None => [0, 0, 0, 0],
            })
            .collect()
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        image::save_buffer(path, &self.to_rgba(), self.cols as u32, self.rows as u32, image::ExtendedColorType::Rgba8)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(path, io),
                other => Error::Image(other.to_string()),
            })
    }

    pub fn save_sidecar(&self, path: &Path) -> Result<()> {
        crate::data_io::write_versioned_json(&self.sidecar(), path)
    }

    /// `row,col,lat,lon,value` with an empty value for invalid cells.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("row,col,lat,lon,value\n");
        for r in 0..self.rows {
            for c in 0..self.cols {
                let (lat, lon) = self.spec.cell_center(r, c);
                let v = self.get(r, c).map(|v| v.to_string()).unwrap_or_default();
                out.push_str(&format!("{r},{c},{lat},{lon},{v}\n"));
            }
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

/// 256-entry blue -> yellow -> red ramp over scores in [1, 10].
pub fn colormap(score: f64) -> [u8; 3] {
    let t = ((score - 1.0) / 9.0).clamp(0.0, 1.0);
    let i = (t * 255.0).round() as u32;
    if i < 128 {
        let f = i as f64 / 127.0;
        [(255.0 * f).round() as u8, (255.0 * f).round() as u8, (255.0 * (1.0 - f)).round() as u8]
    } else {
        let f = (i - 128) as f64 / 127.0;
        [255, (255.0 * (1.0 - f)).round() as u8, 0]
    }
}

/// Predicts every cell center in parallel; the result does not depend on
/// evaluation order.
pub fn rasterize(predictor: &MapPredictor<'_>, spec: &MapSpec) -> Result<MapRaster> {
    spec.validate()?;
    match predictor.method {
        MapMethod::Cvh => {
            predictor.cvh_parts()?;
        }
        MapMethod::Overhead => {
            predictor.overhead_parts()?;
        }
        _ => {}
    }
    let (rows, cols) = spec.shape();
    let values = (0..rows * cols)
        .into_par_iter()
        .map(|i| {
            let (lat, lon) = spec.cell_center(i / cols, i % cols);
            Ok(predictor
                .predict(lat, lon, spec.cell_deg)?
                .map(|d| d.weighted_average_score()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MapRaster {
        spec: *spec,
        rows,
        cols,
        values,
    })
}
