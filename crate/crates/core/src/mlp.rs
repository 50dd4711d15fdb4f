//! Dense feedforward network with tanh hidden layers and a softmax head over
//! the ten rating levels, plus the minibatch SGD loop shared by every trained
//! model in the crate.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratings::{RatingHistogram, ScoreDistribution, LEVELS};

/// Lower clamp applied to probabilities inside every log.
pub const LOG_CLAMP: f64 = 1e-12;

/// One affine layer; `weights` is `out_dim x in_dim`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().zip(self.weights.chunks_exact(self.in_dim)).map(|(b, row)| {
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
    }
}

/// Gradient with the same shape as an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net.layers.iter().map(|l| Dense::zeros(l.in_dim, l.out_dim)).collect(),
        }
    }

    /// All entries, layer by layer, weights before biases.
    pub fn flatten(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += scale * y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += scale * y);
        }
    }
}

fn flatten(layers: &[Dense]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
        .collect()
}

/// Feedforward network; tanh on hidden layers, linear last layer producing
/// ten logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

impl Mlp {
    /// Assembles a network from layers, checking the chain of dimensions.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::invalid("network has no layers"));
        };
        if last.out_dim != LEVELS {
            return Err(Error::DimMismatch {
                expected: LEVELS,
                actual: last.out_dim,
            });
        }
        for (i, l) in layers.iter().enumerate() {
            if l.in_dim == 0 || l.weights.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return Err(Error::invalid(format!("layer {i} has inconsistent shape")));
            }
            if i > 0 && layers[i - 1].out_dim != l.in_dim {
                return Err(Error::DimMismatch {
                    expected: layers[i - 1].out_dim,
                    actual: l.in_dim,
                });
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("layer {i} has a non-finite parameter")));
            }
        }
        Ok(Self { layers })
    }

    fn check_dims(dims: &[usize]) -> Result<()> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::config(format!("invalid layer dims {dims:?}")));
        }
        if *dims.last().unwrap() != LEVELS {
            return Err(Error::DimMismatch {
                expected: LEVELS,
                actual: *dims.last().unwrap(),
            });
        }
        Ok(())
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::check_dims(dims)?;
        Ok(Self {
            layers: dims.windows(2).map(|d| Dense::zeros(d[0], d[1])).collect(),
        })
    }

    /// Glorot-uniform weights in `[-a, a]`, `a = sqrt(6 / (fan_in + fan_out))`; zero biases.
    pub fn glorot<R: Rng>(dims: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(dims)?;
        for l in &mut net.layers {
            let a = (6.0 / (l.in_dim + l.out_dim) as f64).sqrt();
            for w in &mut l.weights {
                *w = rng.random_range(-a..=a);
            }
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn flatten_params(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    /// Mutable references to all parameters, in [`Gradients::flatten`] order.
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    /// Sum of squared weights (biases excluded).
    pub fn weight_sq_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| &l.weights)
            .map(|w| w * w)
            .sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Activations of every layer; `acts[0]` is the input, the last entry the logits.
    fn forward_cached(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.out_dim);
            layer.forward(&acts[i], &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
        }
        acts
    }

    pub fn logits(&self, x: &[f64]) -> Result<[f64; LEVELS]> {
        self.check_input(x)?;
        let acts = self.forward_cached(x);
        Ok(to_levels(acts.last().unwrap()))
    }

    pub fn predict(&self, x: &[f64]) -> Result<ScoreDistribution> {
        Ok(ScoreDistribution::softmax(&self.logits(x)?))
    }

    /// Loss and parameter gradient for one sample with target weights `t`;
    /// loss is `-sum_r t_r ln max(p_r, eps)`.
    pub fn loss_and_gradient(&self, x: &[f64], target: &[f64; LEVELS]) -> Result<(f64, Gradients)> {
        self.check_input(x)?;
        let acts = self.forward_cached(x);
        let pred = ScoreDistribution::softmax(&to_levels(acts.last().unwrap()));
        let loss = weighted_nll(&pred, target);
        let mass: f64 = target.iter().sum();
        let delta: Vec<f64> = pred
            .probs()
            .iter()
            .zip(target)
            .map(|(p, t)| mass * p - t)
            .collect();
        Ok((loss, self.backward(&acts, delta)))
    }

    fn backward(&self, acts: &[Vec<f64>], mut delta: Vec<f64>) -> Gradients {
        let mut grads = Gradients::zeros_like(self);
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &acts[i];
            let g = &mut grads.layers[i];
            for (o, d) in delta.iter().enumerate() {
                g.bias[o] = *d;
                let row = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                row.iter_mut().zip(input).for_each(|(w, v)| *w = d * v);
            }
            if i == 0 {
                break;
            }
            // input of layer i is tanh output of layer i-1
            let mut prev = vec![0.0; layer.in_dim];
            for (o, d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
            }
            prev.iter_mut()
                .zip(input)
                .for_each(|(p, a)| *p *= 1.0 - a * a);
            delta = prev;
        }
        grads
    }

    fn sgd_step(&mut self, grads: &Gradients, lr: f64, weight_decay: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in l.weights.iter_mut().zip(&g.weights) {
                // proximal form of `w -= lr * (gw + decay * w)`; stable for any decay
                *w = (*w - lr * gw) / (1.0 + lr * weight_decay);
            }
            for (b, gb) in l.bias.iter_mut().zip(&g.bias) {
                *b -= lr * gb;
            }
        }
    }

    fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}

fn to_levels(v: &[f64]) -> [f64; LEVELS] {
    let mut out = [0.0; LEVELS];
    out.copy_from_slice(v);
    out
}

/// `-sum_r t_r ln max(p_r, eps)`.
pub fn weighted_nll(pred: &ScoreDistribution, target: &[f64; LEVELS]) -> f64 {
    pred.probs()
        .iter()
        .zip(target)
        .filter(|(_, &t)| t != 0.0)
        .map(|(p, t)| -t * p.max(LOG_CLAMP).ln())
        .sum::<f64>()
        + 0.0
}

/// Which of the three training objectives to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Cross-entropy against the rounded mean rating.
    Average,
    /// Cross-entropy against the normalized rating histogram.
    Distribution,
    /// Negative multinomial log-likelihood of the rating counts.
    Multinomial,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Average, LossKind::Distribution, LossKind::Multinomial];

    /// Per-level target weights whose weighted NLL is this loss.
    pub fn target(self, hist: &RatingHistogram) -> Result<[f64; LEVELS]> {
        Ok(match self {
            LossKind::Average => {
                let mut t = [0.0; LEVELS];
                t[hist.rounded_mean()? as usize - 1] = 1.0;
                t
            }
            LossKind::Distribution => *hist.normalize()?.probs(),
            LossKind::Multinomial => {
                if hist.is_empty() {
                    return Err(Error::invalid("empty rating histogram"));
                }
                hist.counts().map(|c| c as f64)
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Average => "average",
            LossKind::Distribution => "distribution",
            LossKind::Multinomial => "multinomial",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(LossKind::Average),
            "distribution" => Ok(LossKind::Distribution),
            "multinomial" => Ok(LossKind::Multinomial),
            other => Err(Error::config(format!("unknown loss {other:?}"))),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Minibatch SGD settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub loss_kind: LossKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub hidden_dims: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss_kind: LossKind::Multinomial,
            learning_rate: 1e-4,
            batch_size: 40,
            epochs: 10,
            validation_fraction: 0.10,
            seed: 0,
            hidden_dims: vec![32],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::config("validation_fraction must lie in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::config("hidden layer width must be >= 1"));
        }
        Ok(())
    }
}

/// Losses recorded after one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
}

/// Per-epoch losses of a training run. Epoch 0 is the initialized model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss_kind: LossKind,
    pub n_train: usize,
    pub n_validation: usize,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl TrainReport {
    pub fn initial_validation_loss(&self) -> Option<f64> {
        self.epochs[0].validation_loss
    }

    pub fn best_validation_loss(&self) -> Option<f64> {
        self.epochs[self.best_epoch].validation_loss
    }
}

/// Owned training example for the SGD loop.
pub(crate) struct Sample<'a> {
    pub input: &'a [f64],
    pub target: [f64; LEVELS],
}

fn mean_loss(net: &Mlp, samples: &[Sample<'_>], idx: &[usize]) -> f64 {
    let total: f64 = idx
        .iter()
        .map(|&i| {
            let s = &samples[i];
            weighted_nll(&net.predict(s.input).expect("checked dims"), &s.target)
        })
        .sum();
    total / idx.len() as f64
}

/// Minimizes `sum_n loss_n + l2 * ||W||^2` by seeded minibatch SGD. Each step
/// takes the batch-mean data gradient, then shrinks weights by the proximal
/// operator of `(l2 / n_train) * ||W||^2`. Returns the
/// parameters with the lowest validation loss (training loss when no
/// validation split exists).
pub(crate) fn fit(
    init: Mlp,
    samples: &[Sample<'_>],
    config: &TrainConfig,
    l2: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Mlp, TrainReport)> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    for s in samples {
        init.check_input(s.input)?;
    }

    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(rng);
    let n_val = ((samples.len() as f64 * config.validation_fraction).round() as usize)
        .min(samples.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let (val_idx, mut train_idx) = (val_idx.to_vec(), train_idx.to_vec());

    let score = |net: &Mlp, train_idx: &[usize]| EpochRecord {
        epoch: 0,
        train_loss: mean_loss(net, samples, train_idx),
        validation_loss: (!val_idx.is_empty()).then(|| mean_loss(net, samples, &val_idx)),
    };
    let selection = |r: &EpochRecord| r.validation_loss.unwrap_or(r.train_loss);

    let mut net = init;
    let mut records = vec![score(&net, &train_idx)];
    let mut best = (net.clone(), 0usize, selection(&records[0]));
    let weight_decay = 2.0 * l2 / train_idx.len() as f64;

    for epoch in 1..=config.epochs {
        train_idx.shuffle(rng);
        for (b, batch) in train_idx.chunks(config.batch_size).enumerate() {
            let mut acc = Gradients::zeros_like(&net);
            let mut batch_loss = 0.0;
            for &i in batch {
                let (loss, g) = net.loss_and_gradient(samples[i].input, &samples[i].target)?;
                batch_loss += loss;
                acc.add_scaled(&g, 1.0 / batch.len() as f64);
            }
            net.sgd_step(&acc, config.learning_rate, weight_decay);
            if !batch_loss.is_finite() || !net.is_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
        }
        let mut rec = score(&net, &train_idx);
        rec.epoch = epoch;
        if !selection(&rec).is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: train_idx.len().div_ceil(config.batch_size),
            });
        }
        if selection(&rec) < best.2 {
            best = (net.clone(), epoch, selection(&rec));
        }
        records.push(rec);
    }

    let report = TrainReport {
        loss_kind: config.loss_kind,
        n_train: train_idx.len(),
        n_validation: val_idx.len(),
        epochs: records,
        best_epoch: best.1,
    };
    Ok((best.0, report))
}

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
