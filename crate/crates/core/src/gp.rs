//! Gaussian-process regression with a fixed squared-exponential kernel.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// GP posterior over targets standardized to zero mean and unit variance.
pub struct GaussianProcess<const D: usize> {
    xs: Vec<[f64; D]>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    y_mean: f64,
    y_scale: f64,
    length_scale: f64,
}

fn sq_dist<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl<const D: usize> GaussianProcess<D> {
    pub fn fit(xs: &[[f64; D]], ys: &[f64], length_scale: f64, noise: f64) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::invalid("GP needs matching, nonempty inputs and targets"));
        }
        let n = xs.len();
        let y_mean = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let kernel = |a: &[f64; D], b: &[f64; D]| (-sq_dist(a, b) / (2.0 * length_scale * length_scale)).exp();
        let k = DMatrix::from_fn(n, n, |i, j| kernel(&xs[i], &xs[j]) + if i == j { noise } else { 0.0 });
        let chol = Cholesky::new(k).ok_or_else(|| Error::invalid("GP kernel matrix is not positive definite"))?;
        let y = DVector::from_iterator(n, ys.iter().map(|y| (y - y_mean) / y_scale));
        let alpha = chol.solve(&y);
        Ok(Self {
            xs: xs.to_vec(),
            chol,
            alpha,
            y_mean,
            y_scale,
            length_scale,
        })
    }

    /// Posterior mean and standard deviation at `x`, in target units.
    pub fn predict(&self, x: &[f64; D]) -> (f64, f64) {
        let ls2 = 2.0 * self.length_scale * self.length_scale;
        let k = DVector::from_iterator(self.xs.len(), self.xs.iter().map(|xi| (-sq_dist(xi, x) / ls2).exp()));
        let mean = k.dot(&self.alpha);
        let v = self.chol.l().solve_lower_triangular(&k).expect("cholesky factor is invertible");
        let var = (1.0 - v.dot(&v)).max(0.0);
        (self.y_mean + self.y_scale * mean, self.y_scale * var.sqrt())
    }
}

/// Expected improvement over `best` for maximization.
pub fn expected_improvement(mean: f64, std: f64, best: f64, xi: f64) -> f64 {
    let gain = mean - best - xi;
    if std <= 1e-12 {
        return gain.max(0.0);
    }
    let z = gain / std;
    let cdf = 0.5 * erfc(-z / std::f64::consts::SQRT_2);
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    gain * cdf + std * pdf
}
