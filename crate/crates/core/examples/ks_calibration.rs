//! Monte-Carlo K-S test: rejection rate when predictions equal the
//! generating distribution, and when they are shifted by one level.
//!
//! cargo run --release --example ks_calibration

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scenic::metrics::{ks_test, KS_ALPHA};
use scenic::{RatingHistogram, ScoreDistribution};

fn main() -> scenic::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut null_rejects, mut shifted_rejects) = (0, 0);
    let n = 500;
    for i in 0..n {
        let center = rng.random_range(2.0..9.0);
        let truth = ScoreDistribution::discretized_normal(center, 1.0)?;
        let shifted = ScoreDistribution::discretized_normal(center + 1.0, 1.0)?;
        let cdf = truth.cdf();
        let votes: Vec<u8> = (0..10)
            .map(|_| {
                let u: f64 = rng.random();
                cdf.iter().position(|&c| u < c).unwrap_or(9) as u8 + 1
            })
            .collect();
        let hist = RatingHistogram::from_ratings(&votes)?;
        null_rejects += usize::from(!ks_test(&truth, &hist, 2000, i)?.pass_at_5pct);
        shifted_rejects += usize::from(!ks_test(&shifted, &hist, 2000, i)?.pass_at_5pct);
    }
    println!("alpha {KS_ALPHA}");
    println!("true distribution    rejected {:.1}%", 100.0 * null_rejects as f64 / n as f64);
    println!("shifted by one level rejected {:.1}%", 100.0 * shifted_rejects as f64 / n as f64);
    Ok(())
}
