//! Full pipeline on fully observed curves: estimate, choose the ridge by
//! cross-validation, threshold, and score against the known graph.

use gpgraph::estimators::ObservationSet;
use gpgraph::kernels::{gram, sample_paths, Grid, KernelKind};
use gpgraph::operator::{diag_blocks, precision_block_norms};
use gpgraph::partition::{make_partition, pixelate_truth, TruthSpec};
use gpgraph::recovery::{auc, roc, threshold_graph, tpr_fpr};
use gpgraph::tuning::{lambda_grid, ridge_cv, threshold_candidates, RidgeRegime};

fn main() -> gpgraph::Result<()> {
    let (r, p, n) = (300, 20, 100);
    let kind = KernelKind::kms();
    let samples = sample_paths(&gram(&kind, Grid::new(r)?)?, n, 42)?;
    let obs = ObservationSet::Complete { samples };
    let partition = make_partition(r, p)?;

    let est = obs.estimate(false)?;
    let grid = lambda_grid(&diag_blocks(&est.gram, &partition)?, RidgeRegime::Complete)?;
    let choice = ridge_cv(&obs, &partition, 5, &grid, false)?;
    println!("cross-validated kappa = {:.3e}", choice.kappa);

    let norms = precision_block_norms(&est.gram, &partition, choice.kappa)?;
    let truth = pixelate_truth(&TruthSpec::for_kernel(&kind), &partition);
    println!("AUC = {:.4}", auc(&roc(&norms, &truth)?));

    if let Some(rho) = threshold_candidates(&norms).deepest_minimum() {
        let (tpr, fpr) = tpr_fpr(&threshold_graph(&norms, rho), &truth)?;
        println!("density valley at rho = {rho:.3e}: TPR = {tpr:.3}, FPR = {fpr:.3}");
    }
    Ok(())
}
