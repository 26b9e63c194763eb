//! Threshold candidates from the density of log block norms.

use gpgraph::harness::population_recovery;
use gpgraph::kernels::KernelKind;
use gpgraph::tuning::threshold_candidates;

fn main() -> gpgraph::Result<()> {
    let pop = population_recovery(&KernelKind::Brownian, 300, 20, None, None)?;
    let c = threshold_candidates(&pop.norms);
    println!("bandwidth {:.3}, {} zero norms", c.bandwidth, c.zero_count);
    for (rho, d) in c.minima.iter().zip(&c.minima_density) {
        println!("local minimum at rho = {rho:.3e} (log10 {:.2}), density {d:.4}", rho.log10());
    }
    for rho in &c.elbows {
        println!("elbow at rho = {rho:.3e}");
    }
    // Coarse text plot of the density curve.
    let peak = c.density_curve.iter().map(|&(_, f)| f).fold(0.0, f64::max);
    for (x, f) in c.density_curve.iter().step_by(16) {
        println!("{x:>7.2} {}", "#".repeat((60.0 * f / peak).round() as usize));
    }
    Ok(())
}
