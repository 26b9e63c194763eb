//! Recovers graphs from exact kernels and compares them with the analytic
//! reference graphs.

use gpgraph::harness::population_recovery;
use gpgraph::kernels::KernelKind;
use gpgraph::partition::{make_partition, pixelate_truth, TruthSpec};
use gpgraph::recovery::tpr_fpr;

fn main() -> gpgraph::Result<()> {
    let (r, p) = (300, 20);
    for kind in [KernelKind::Brownian, KernelKind::kms(), KernelKind::IntegratedBrownian] {
        let pop = match population_recovery(&kind, r, p, None, None) {
            Ok(pop) => pop,
            Err(e) => {
                println!("{kind}: {e}");
                continue;
            }
        };
        let truth = pixelate_truth(&TruthSpec::for_kernel(&kind), &make_partition(r, p)?);
        let (tpr, fpr) = tpr_fpr(&pop.graph, &truth)?;
        println!(
            "{kind}: kappa = {:.2e}, rho = {:.3e}, {} edges, TPR = {tpr:.3}, FPR = {fpr:.3}",
            pop.kappa,
            pop.rho,
            pop.graph.count()
        );
    }
    let pop = population_recovery(&KernelKind::Brownian, r, 10, None, None)?;
    println!("\nBrownian graph at p = 10:\n{}", pop.graph);
    Ok(())
}
