//! Crowdsourced rating histograms and predicted rating distributions.
//!
//! Ratings are integers on a 1..=10 scale. A [`RatingHistogram`] stores the
//! count of each rating; a [`ScoreDistribution`] is a probability vector over
//! the same ten levels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of rating levels.
pub const LEVELS: usize = 10;

/// Per-image counts of integer ratings. `counts[i]` holds the number of
/// ratings equal to `i + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct RatingHistogram {
    counts: [u32; LEVELS],
}

impl RatingHistogram {
    pub fn from_counts(counts: [u32; LEVELS]) -> Self {
        Self { counts }
    }

    /// Folds a raw list of ratings into counts.
    pub fn from_ratings(ratings: &[u8]) -> Result<Self> {
        let mut counts = [0u32; LEVELS];
        for &r in ratings {
            if !(1..=LEVELS as u8).contains(&r) {
                return Err(Error::invalid(format!("rating {r} outside 1..=10")));
            }
            counts[r as usize - 1] += 1;
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[u32; LEVELS] {
        &self.counts
    }

    /// Total number of ratings.
    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Expands the histogram back into a sorted rating list.
    pub fn to_ratings(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.total() as usize);
        for (i, &c) in self.counts.iter().enumerate() {
            out.extend(std::iter::repeat_n(i as u8 + 1, c as usize));
        }
        out
    }

    fn require_nonempty(&self) -> Result<u32> {
        match self.total() {
            0 => Err(Error::invalid("empty rating histogram")),
            n => Ok(n),
        }
    }

    /// Empirical distribution of the ratings.
    pub fn normalize(&self) -> Result<ScoreDistribution> {
        let total = self.require_nonempty()? as f64;
        let mut probs = [0.0; LEVELS];
        for (p, &c) in probs.iter_mut().zip(&self.counts) {
            *p = c as f64 / total;
        }
        Ok(ScoreDistribution { probs })
    }

    pub fn mean_rating(&self) -> Result<f64> {
        let total = self.require_nonempty()? as f64;
        let sum: f64 = self
            .counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (i + 1) as f64 * c as f64)
            .sum();
        Ok(sum / total)
    }

    /// Mean rating rounded half-up to an integer label in 1..=10.
    pub fn rounded_mean(&self) -> Result<u8> {
        Ok(round_rating(self.mean_rating()?))
    }

    /// Shannon entropy (nats) of the normalized histogram.
    pub fn entropy(&self) -> Result<f64> {
        Ok(self.normalize()?.entropy())
    }
}

/// Rounds half-up and clamps to the rating scale.
pub fn round_rating(x: f64) -> u8 {
    (x + 0.5).floor().clamp(1.0, LEVELS as f64) as u8
}

/// A probability vector over the ten rating levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; LEVELS]", into = "[f64; LEVELS]")]
pub struct ScoreDistribution {
    probs: [f64; LEVELS],
}

impl ScoreDistribution {
    /// Validates non-negativity and unit sum (within 1e-9).
    pub fn new(probs: [f64; LEVELS]) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("distribution has negative or non-finite entry"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("distribution sums to {sum}, not 1")));
        }
        Ok(Self { probs })
    }

    /// Law of `round(center + std * Z)` clamped to the scale, `Z` standard
    /// normal; `std == 0` gives a point mass at `round_rating(center)`.
    pub fn discretized_normal(center: f64, std: f64) -> Result<Self> {
        if !center.is_finite() || !(std >= 0.0 && std.is_finite()) {
            return Err(Error::invalid(format!("bad discretized normal ({center}, {std})")));
        }
        if std == 0.0 {
            return Self::one_hot(round_rating(center));
        }
        // upper tail mass beyond r + 0.5, computed with erfc for accuracy in both tails
        let upper = |r: f64| 0.5 * statrs::function::erf::erfc((r + 0.5 - center) / (std * std::f64::consts::SQRT_2));
        let mut probs = [0.0; LEVELS];
        let mut prev = 1.0;
        for (i, p) in probs.iter_mut().enumerate() {
            let tail = if i + 1 == LEVELS { 0.0 } else { upper(i as f64 + 1.0) };
            *p = (prev - tail).max(0.0);
            prev = tail;
        }
        let sum: f64 = probs.iter().sum();
        Self::new(probs.map(|p| p / sum))
    }

    pub fn uniform() -> Self {
        Self {
            probs: [1.0 / LEVELS as f64; LEVELS],
        }
    }

    /// Point mass at `rating` (1..=10).
    pub fn one_hot(rating: u8) -> Result<Self> {
        if !(1..=LEVELS as u8).contains(&rating) {
            return Err(Error::invalid(format!("rating {rating} outside 1..=10")));
        }
        let mut probs = [0.0; LEVELS];
        probs[rating as usize - 1] = 1.0;
        Ok(Self { probs })
    }

    /// Softmax of raw logits; always strictly positive and normalized.
    pub fn softmax(logits: &[f64; LEVELS]) -> Self {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs = [0.0; LEVELS];
        let mut sum = 0.0;
        for (p, &z) in probs.iter_mut().zip(logits) {
            *p = (z - max).exp();
            sum += *p;
        }
        for p in &mut probs {
            *p /= sum;
        }
        Self { probs }
    }

    pub fn probs(&self) -> &[f64; LEVELS] {
        &self.probs
    }

    /// Probability of rating `r` (1..=10).
    pub fn prob(&self, rating: u8) -> f64 {
        self.probs[rating as usize - 1]
    }

    /// Expected rating, `sum_r r * p(r)`.
    pub fn weighted_average_score(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum()
    }

    /// Rating with the highest probability; ties go to the lower rating.
    pub fn argmax(&self) -> u8 {
        let mut best = 0;
        for i in 1..LEVELS {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        best as u8 + 1
    }

    pub fn cdf(&self) -> [f64; LEVELS] {
        let mut acc = 0.0;
        let mut out = [0.0; LEVELS];
        for (o, p) in out.iter_mut().zip(&self.probs) {
            acc += p;
            *o = acc;
        }
        out
    }

    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    }
}

impl TryFrom<[f64; LEVELS]> for ScoreDistribution {
    type Error = Error;

    fn try_from(probs: [f64; LEVELS]) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<ScoreDistribution> for [f64; LEVELS] {
    fn from(d: ScoreDistribution) -> Self {
        d.probs
    }
}

/// Coarse partition of images by mean rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Partition {
    Scenic,
    NonScenic,
    Neutral,
}

/// Scenic above 7.0, non-scenic below 3.0, both strict.
pub fn partition_label(mean: f64) -> Result<Partition> {
    if !(1.0..=10.0).contains(&mean) {
        return Err(Error::invalid(format!("mean rating {mean} outside [1, 10]")));
    }
    Ok(if mean > 7.0 {
        Partition::Scenic
    } else if mean < 3.0 {
        Partition::NonScenic
    } else {
        Partition::Neutral
    })
}
