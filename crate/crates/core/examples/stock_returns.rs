//! Cumulative log-returns of synthetic intraday prices, followed by a
//! centred estimate of the conditional-independence graph across the day.

use gpgraph::cli::log_returns;
use gpgraph::estimators::ObservationSet;
use gpgraph::operator::{diag_blocks, precision_block_norms};
use gpgraph::partition::make_partition;
use gpgraph::tuning::{lambda_grid, ridge_cv, threshold_candidates, RidgeRegime};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> gpgraph::Result<()> {
    let (stocks, minutes) = (80, 120);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let step = Normal::new(0.0, 0.001).unwrap();
    let mut walk = DMatrix::from_fn(stocks, minutes + 1, |i, _| 20.0 + i as f64);
    for i in 0..stocks {
        for t in 1..=minutes {
            walk[(i, t)] = walk[(i, t - 1)] * (1.0 + step.sample(&mut rng));
        }
    }
    let returns = log_returns(&walk, "synthetic")?;
    // Drop the opening column, which is identically zero.
    let samples = returns.columns(1, minutes).into_owned();
    let obs = ObservationSet::Complete { samples };
    let partition = make_partition(minutes, 12)?;
    let est = obs.estimate(true)?;
    let grid = lambda_grid(&diag_blocks(&est.gram, &partition)?, RidgeRegime::Complete)?;
    let kappa = ridge_cv(&obs, &partition, 5, &grid, true)?.kappa;
    let norms = precision_block_norms(&est.gram, &partition, kappa)?;
    println!("kappa = {kappa:.3e}");
    let c = threshold_candidates(&norms);
    println!("threshold candidates: minima {:?}, elbows {:?}", c.minima, c.elbows);
    Ok(())
}
