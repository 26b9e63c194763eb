//! Curves seen at five random times each, binned into a coarse covariance.

use gpgraph::estimators::{sparse_cov, Triplet};
use gpgraph::harness::bin_average;
use gpgraph::kernels::{kernel_matrix, GaussianSampler, KernelKind};
use gpgraph::operator::precision_block_norms;
use gpgraph::partition::{make_partition, pixelate_truth, TruthSpec};
use gpgraph::recovery::{auc, roc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> gpgraph::Result<()> {
    let kind = KernelKind::Brownian;
    let (bins, grid, p) = (10, 100, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut curves: Vec<Vec<Triplet>> = Vec::new();
    for _ in 0..3000 {
        let ts: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
        let y = GaussianSampler::new(&kernel_matrix(&kind, &ts)?)?.sample(1, &mut rng);
        curves.push(ts.iter().copied().zip(y.iter().copied()).collect());
    }
    let est = sparse_cov(&curves, bins, grid)?;
    let target = bin_average(&kind, bins, 1000)?;
    let dev = (&est.bin_moments * (bins * bins) as f64 - target).amax();
    println!("max deviation of binned estimate from the bin-averaged kernel: {dev:.3}");

    let partition = make_partition(grid, p)?;
    let norms = precision_block_norms(&est.gram, &partition, 0.1)?;
    let truth = pixelate_truth(&TruthSpec::for_kernel(&kind), &partition);
    println!("AUC with kappa = 0.1: {:.3}", auc(&roc(&norms, &truth)?));
    Ok(())
}
