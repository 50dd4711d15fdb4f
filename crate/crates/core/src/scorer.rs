//! Probabilistic scenicness scorer: a small softmax network over feature
//! vectors trained under one of three rating losses.

use crate::error::{Error, Result};
use crate::featurize::{FeatureVector, Featurizer, FeaturizerSpec, ImageGrid};
use crate::mlp::{self, weighted_nll, Gradients, Mlp, Sample};
use crate::ratings::{RatingHistogram, ScoreDistribution, LEVELS};

pub use crate::mlp::{EpochRecord, LossKind, TrainConfig, TrainReport, LOG_CLAMP};

/// Trained scorer parameters together with the featurizer they expect.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerModel {
    net: Mlp,
    featurizer: FeaturizerSpec,
}

impl ScorerModel {
    pub fn new(net: Mlp, featurizer: FeaturizerSpec) -> Result<Self> {
        featurizer.validate()?;
        if featurizer.dim() != net.input_dim() {
            return Err(Error::DimMismatch {
                expected: featurizer.dim(),
                actual: net.input_dim(),
            });
        }
        Ok(Self { net, featurizer })
    }

    /// Glorot-initialized model with the given hidden widths.
    pub fn random(featurizer: FeaturizerSpec, hidden: &[usize], seed: u64) -> Result<Self> {
        let mut rng = mlp::rng_from_seed(seed);
        Self::new(Mlp::glorot(&layer_dims(&featurizer, hidden), &mut rng)?, featurizer)
    }

    /// All parameters zero: predicts the uniform distribution everywhere.
    pub fn zeros(featurizer: FeaturizerSpec, hidden: &[usize]) -> Result<Self> {
        Self::new(Mlp::zeros(&layer_dims(&featurizer, hidden))?, featurizer)
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn featurizer(&self) -> &FeaturizerSpec {
        &self.featurizer
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        self.net.dims()
    }

    pub fn predict(&self, features: &FeatureVector) -> Result<ScoreDistribution> {
        self.net.predict(features.as_slice())
    }

    /// Featurizes with `featurizer` and predicts.
    pub fn predict_image<F: Featurizer + ?Sized>(&self, featurizer: &F, image: &ImageGrid) -> Result<ScoreDistribution> {
        self.predict(&featurizer.featurize(image)?)
    }
}

fn layer_dims(featurizer: &FeaturizerSpec, hidden: &[usize]) -> Vec<usize> {
    std::iter::once(featurizer.dim())
        .chain(hidden.iter().copied())
        .chain(std::iter::once(LEVELS))
        .collect()
}

/// `-ln p(rounded mean)`.
pub fn loss_average(pred: &ScoreDistribution, hist: &RatingHistogram) -> Result<f64> {
    loss(LossKind::Average, pred, hist)
}

/// Cross-entropy against the normalized histogram.
pub fn loss_distribution(pred: &ScoreDistribution, hist: &RatingHistogram) -> Result<f64> {
    loss(LossKind::Distribution, pred, hist)
}

/// `-sum_r count_r ln p(r)`; not divided by the number of ratings.
pub fn loss_multinomial(pred: &ScoreDistribution, hist: &RatingHistogram) -> Result<f64> {
    loss(LossKind::Multinomial, pred, hist)
}

pub fn loss(kind: LossKind, pred: &ScoreDistribution, hist: &RatingHistogram) -> Result<f64> {
    Ok(weighted_nll(pred, &kind.target(hist)?))
}

/// Analytic gradient of the chosen loss for one example.
pub fn loss_gradient(
    model: &ScorerModel,
    features: &FeatureVector,
    hist: &RatingHistogram,
    kind: LossKind,
) -> Result<Gradients> {
    let target = kind.target(hist)?;
    Ok(model.net.loss_and_gradient(features.as_slice(), &target)?.1)
}

/// A featurized, rated training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: FeatureVector,
    pub ratings: RatingHistogram,
}

/// Trains from a fresh Glorot initialization drawn from `config.seed`.
pub fn train(dataset: &[Example], featurizer: FeaturizerSpec, config: &TrainConfig) -> Result<(ScorerModel, TrainReport)> {
    config.validate()?;
    let mut rng = mlp::rng_from_seed(config.seed);
    let net = Mlp::glorot(&layer_dims(&featurizer, &config.hidden_dims), &mut rng)?;
    let init = ScorerModel::new(net, featurizer)?;
    fit_model(init, dataset, config, rng)
}

/// Continues training from `initial` (warm start); `config.hidden_dims` is ignored.
pub fn train_from(initial: ScorerModel, dataset: &[Example], config: &TrainConfig) -> Result<(ScorerModel, TrainReport)> {
    let rng = mlp::rng_from_seed(config.seed);
    fit_model(initial, dataset, config, rng)
}

fn fit_model(
    init: ScorerModel,
    dataset: &[Example],
    config: &TrainConfig,
    mut rng: rand_chacha::ChaCha8Rng,
) -> Result<(ScorerModel, TrainReport)> {
    if dataset.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let samples = dataset
        .iter()
        .map(|e| {
            Ok(Sample {
                input: e.features.as_slice(),
                target: config.loss_kind.target(&e.ratings)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ScorerModel { net, featurizer } = init;
    let (net, report) = mlp::fit(net, &samples, config, 0.0, &mut rng)?;
    Ok((ScorerModel { net, featurizer }, report))
}

/// Expected rating of a predicted distribution.
pub fn weighted_average_score(dist: &ScoreDistribution) -> f64 {
    dist.weighted_average_score()
}
