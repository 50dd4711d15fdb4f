//! Evaluation of predicted rating distributions: nDCG over the rating labels,
//! a one-sample Kolmogorov-Smirnov fit test with Monte-Carlo p-values, and a
//! rank-based binary AUC.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::FeatureVector;
use crate::ratings::{round_rating, RatingHistogram, ScoreDistribution, LEVELS};

/// Significance level of the K-S fit test.
pub const KS_ALPHA: f64 = 0.05;

/// nDCG of a complete ranking of the labels `1..=n` (`n = ranking.len()`)
/// against integer target `target`. Relevance of label `l` is
/// `(n - 1) - |l - target|`, gain `2^rel - 1`, discount `log2(position + 1)`.
pub fn ndcg_for_ranking(ranking: &[u8], target: u8) -> Result<f64> {
    let n = ranking.len();
    let mut seen = vec![false; n];
    for &l in ranking {
        if l == 0 || l as usize > n || std::mem::replace(&mut seen[l as usize - 1], true) {
            return Err(Error::invalid(format!("{ranking:?} is not a ranking of 1..={n}")));
        }
    }
    if target == 0 || target as usize > n {
        return Err(Error::invalid(format!("target {target} outside 1..={n}")));
    }
    let relevance = |l: u8| (n - 1) as f64 - (l as f64 - target as f64).abs();
    let dcg = |order: &[u8]| -> f64 {
        order
            .iter()
            .enumerate()
            .map(|(i, &l)| (relevance(l).exp2() - 1.0) / ((i + 2) as f64).log2())
            .sum()
    };
    let mut ideal = ranking.to_vec();
    ideal.sort_by(|&a, &b| relevance(b).total_cmp(&relevance(a)).then(a.cmp(&b)));
    Ok(dcg(ranking) / dcg(&ideal))
}

/// Labels ordered by descending probability, ties by ascending label.
pub fn ranking_of(pred: &ScoreDistribution) -> [u8; LEVELS] {
    let mut labels: [u8; LEVELS] = std::array::from_fn(|i| i as u8 + 1);
    labels.sort_by(|&a, &b| pred.prob(b).total_cmp(&pred.prob(a)).then(a.cmp(&b)));
    labels
}

/// nDCG of the prediction's label ranking against the mean human rating.
pub fn ndcg(pred: &ScoreDistribution, true_mean: f64) -> Result<f64> {
    if !(1.0..=10.0).contains(&true_mean) {
        return Err(Error::invalid(format!("mean rating {true_mean} outside [1, 10]")));
    }
    ndcg_for_ranking(&ranking_of(pred), round_rating(true_mean))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub pass_at_5pct: bool,
}

/// `max_r |F_empirical(r) - F_pred(r)|` over the rating levels.
pub fn ks_statistic(pred_cdf: &[f64; LEVELS], counts: &[u32; LEVELS], total: u32) -> f64 {
    let mut acc = 0u32;
    let mut sup = 0.0f64;
    for (c, f) in counts.iter().zip(pred_cdf) {
        acc += c;
        sup = sup.max((acc as f64 / total as f64 - f).abs());
    }
    sup
}

fn sample_counts<R: Rng>(cdf: &[f64; LEVELS], last: usize, n: u32, rng: &mut R) -> [u32; LEVELS] {
    let mut counts = [0u32; LEVELS];
    for _ in 0..n {
        let u: f64 = rng.random();
        let r = cdf[..last].iter().position(|&f| u < f).unwrap_or(last);
        counts[r] += 1;
    }
    counts
}

/// One-sample K-S test with a seeded Monte-Carlo null distribution.
pub fn ks_test(pred: &ScoreDistribution, ratings: &RatingHistogram, mc_samples: usize, seed: u64) -> Result<KsResult> {
    ks_test_with_rng(pred, ratings, mc_samples, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// As [`ks_test`], drawing resamples from `rng`. The p-value is
/// `(#{resampled statistic >= observed} + 1) / (mc_samples + 1)`.
pub fn ks_test_with_rng<R: Rng>(
    pred: &ScoreDistribution,
    ratings: &RatingHistogram,
    mc_samples: usize,
    rng: &mut R,
) -> Result<KsResult> {
    let total = ratings.total();
    if total == 0 {
        return Err(Error::invalid("empty rating set"));
    }
    let cdf = pred.cdf();
    let observed = ks_statistic(&cdf, ratings.counts(), total);
    // highest level with positive mass absorbs cdf rounding below 1
    let last = pred.probs().iter().rposition(|&p| p > 0.0).unwrap_or(LEVELS - 1);
    let tol = 1e-12;
    let mut extreme = 0usize;
    for _ in 0..mc_samples {
        let counts = sample_counts(&cdf, last, total, rng);
        if ks_statistic(&cdf, &counts, total) >= observed - tol {
            extreme += 1;
        }
    }
    let p_value = (extreme + 1) as f64 / (mc_samples + 1) as f64;
    Ok(KsResult {
        statistic: observed,
        p_value,
        pass_at_5pct: p_value >= KS_ALPHA,
    })
}

/// Probability that a random positive outscores a random negative (ties ½).
pub fn auc_binary(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("AUC needs both positive and negative labels"));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of midranks of positives (Mann-Whitney U)
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        pos_rank_sum += midrank * idx[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// An image to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalItem {
    pub id: String,
    pub features: FeatureVector,
    pub ratings: RatingHistogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub mc_samples: usize,
    pub seed: u64,
    /// Images with fewer ratings are skipped.
    pub min_ratings: u32,
    /// AUC positives have mean rating strictly above this.
    pub auc_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            mc_samples: 10_000,
            seed: 0,
            min_ratings: 10,
            auc_threshold: 7.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub n_ratings: u32,
    pub mean_rating: f64,
    pub predicted_score: f64,
    pub ndcg: f64,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub ks_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_ndcg: f64,
    pub ks_pass_rate: f64,
    /// `None` when the evaluated images are all on one side of the threshold.
    pub auc: Option<f64>,
    pub per_image: Vec<ImageRecord>,
}

/// FNV-1a; stable across platforms and runs.
pub(crate) fn stable_hash(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Per-image RNG keyed by `(seed, id)`, independent of evaluation order.
pub fn image_rng(seed: u64, id: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stable_hash(id.as_bytes()));
    rng
}

/// Scores every image with at least `min_ratings` ratings.
pub fn evaluate<P>(items: &[EvalItem], predictor: P, config: &EvalConfig) -> Result<EvalReport>
where
    P: Fn(&EvalItem) -> Result<ScoreDistribution> + Sync,
{
    let kept: Vec<&EvalItem> = items
        .iter()
        .filter(|it| it.ratings.total() >= config.min_ratings.max(1))
        .collect();
    if kept.is_empty() {
        return Err(Error::invalid(format!(
            "no test images with at least {} ratings",
            config.min_ratings.max(1)
        )));
    }
    let per_image = kept
        .par_iter()
        .map(|it| {
            let pred = predictor(it)?;
            let mean = it.ratings.mean_rating()?;
            let mut rng = image_rng(config.seed, &it.id);
            let ks = ks_test_with_rng(&pred, &it.ratings, config.mc_samples, &mut rng)?;
            Ok(ImageRecord {
                id: it.id.clone(),
                n_ratings: it.ratings.total(),
                mean_rating: mean,
                predicted_score: pred.weighted_average_score(),
                ndcg: ndcg(&pred, mean)?,
                ks_statistic: ks.statistic,
                ks_p_value: ks.p_value,
                ks_pass: ks.pass_at_5pct,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = per_image.len() as f64;
    let scores: Vec<f64> = per_image.iter().map(|r| r.predicted_score).collect();
    let labels: Vec<bool> = per_image.iter().map(|r| r.mean_rating > config.auc_threshold).collect();
    let both_classes = labels.iter().any(|&l| l) && labels.iter().any(|&l| !l);
    Ok(EvalReport {
        mean_ndcg: per_image.iter().map(|r| r.ndcg).sum::<f64>() / n,
        ks_pass_rate: per_image.iter().filter(|r| r.ks_pass).count() as f64 / n,
        auc: if both_classes {
            Some(auc_binary(&scores, &labels)?)
        } else {
            None
        },
        per_image,
    })
}
