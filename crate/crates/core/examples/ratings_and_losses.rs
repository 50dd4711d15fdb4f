//! Rating histograms, predicted distributions and the three training losses.
//!
//! cargo run --example ratings_and_losses

use scenic::ratings::partition_label;
use scenic::scorer::{loss_average, loss_distribution, loss_multinomial};
use scenic::{RatingHistogram, ScoreDistribution};

fn main() -> scenic::Result<()> {
    let votes = RatingHistogram::from_ratings(&[7, 8, 8, 9, 6, 8, 10])?;
    println!("counts        {:?}", votes.counts());
    println!("mean          {:.3}", votes.mean_rating()?);
    println!("rounded mean  {}", votes.rounded_mean()?);
    println!("entropy       {:.4} nats", votes.entropy()?);
    println!("partition     {:?}", partition_label(votes.mean_rating()?)?);

    let sharp = ScoreDistribution::one_hot(8)?;
    let spread = ScoreDistribution::discretized_normal(7.9, 1.0)?;
    for (name, pred) in [("one-hot 8", sharp), ("normal(7.9, 1)", spread), ("uniform", ScoreDistribution::uniform())] {
        println!(
            "{name:<15} avg {:>8.3}  distribution {:>8.3}  multinomial {:>8.3}  score {:.2}",
            loss_average(&pred, &votes)?,
            loss_distribution(&pred, &votes)?,
            loss_multinomial(&pred, &votes)?,
            pred.weighted_average_score()
        );
    }
    Ok(())
}
