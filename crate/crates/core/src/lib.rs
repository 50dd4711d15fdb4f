//! Learning, evaluating and mapping crowdsourced scenicness ratings.
//!
//! The crate predicts a probability distribution over the ten rating levels
//! of an image from a feature vector, scores those predictions against human
//! ratings, explains them with occlusion saliency and crop search, and turns
//! sparse geotagged predictions into dense maps.

pub mod cli;
pub mod crop;
pub mod data_io;
pub mod error;
pub mod featurize;
pub mod geomap;
pub mod gp;
pub mod metrics;
pub mod mlp;
pub mod ratings;
pub mod saliency;
pub mod scorer;

pub use error::{Error, Result};
pub use featurize::{FeatureVector, Featurizer, FeaturizerSpec, ImageGrid};
pub use ratings::{RatingHistogram, ScoreDistribution};
pub use scorer::{LossKind, ScorerModel, TrainConfig};
