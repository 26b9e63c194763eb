//! Evaluates the benchmark covariance kernels and draws sample paths.

use gpgraph::kernels::{eval_kernel, gram, sample_paths, Grid, KernelKind};

fn main() -> gpgraph::Result<()> {
    let grid = Grid::new(100)?;
    for kind in KernelKind::benchmark() {
        let g = gram(&kind, grid)?;
        let eig = g.values().clone().symmetric_eigenvalues();
        println!(
            "{kind:>20}: K(0.25, 0.75) = {:.5}, trace = {:.4}, eigenvalues in [{:.2e}, {:.2e}]",
            eval_kernel(&kind, 0.25, 0.75)?,
            g.operator_trace(),
            eig.min(),
            eig.max()
        );
    }

    let g = gram(&KernelKind::Brownian, grid)?;
    let paths = sample_paths(&g, 3, 7)?;
    for (k, row) in paths.row_iter().enumerate() {
        let ends: Vec<String> = [0, 49, 99].iter().map(|&i| format!("{:+.3}", row[i])).collect();
        println!("Brownian path {k}: values at u = 0.005, 0.495, 0.995: {}", ends.join(" "));
    }
    Ok(())
}
