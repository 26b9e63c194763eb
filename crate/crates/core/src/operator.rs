//! Discretised operator-matrix algebra.
//!
//! An integral operator whose kernel is sampled on an `R`-point grid as the
//! matrix `M` acts on coordinate vectors as `(1/R) M`. Applying that single
//! quadrature rule to the ridge-whitened correlation operator gives
//!
//! ```text
//! R0 = [κ I + D/R]^{-1/2} (K - D) [κ I + D/R]^{-1/2}
//! P  = I - (I + R0/R)^{-1} (R0/R)
//! ```
//!
//! where `D` keeps only the within-cell blocks of `K`. Block spectral norms
//! of `P` are what gets thresholded.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::kernels::GramMatrix;
use crate::partition::Partition;

/// Minimum admissible eigenvalue of `I + S`.
pub const SINGULARITY_TOL: f64 = 1e-12;

/// Margin added when a ridge below the floor is raised to it.
pub const RIDGE_MARGIN: f64 = 1e-12;

/// Within-cell restrictions of a Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagBlocks {
    blocks: Vec<DMatrix<f64>>,
    partition: Partition,
}

impl DiagBlocks {
    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn partition(&self) -> Partition {
        self.partition
    }

    /// Block-diagonal `R × R` matrix `D`.
    pub fn assemble(&self) -> DMatrix<f64> {
        let r = self.partition.grid_len();
        let mut d = DMatrix::zeros(r, r);
        for (j, block) in self.blocks.iter().enumerate() {
            let start = self.partition.block_range(j).start;
            d.view_mut((start, start), block.shape()).copy_from(block);
        }
        d
    }

    /// Spectral norm of `D/R`.
    pub fn scaled_norm(&self) -> f64 {
        let r = self.partition.grid_len() as f64;
        self.blocks
            .iter()
            .map(|b| b.clone().symmetric_eigenvalues().amax() / r)
            .fold(0.0, f64::max)
    }
}

fn check_dims(g: &GramMatrix, partition: &Partition) -> Result<()> {
    if g.dim() != partition.grid_len() {
        return Err(Error::DimensionMismatch(format!(
            "Gram matrix has R = {} but the partition expects R = {}",
            g.dim(),
            partition.grid_len()
        )));
    }
    Ok(())
}

/// Extracts the `p` within-cell blocks of `g`.
pub fn diag_blocks(g: &GramMatrix, partition: &Partition) -> Result<DiagBlocks> {
    check_dims(g, partition)?;
    let b = partition.block_len();
    let blocks = (0..partition.cells())
        .map(|j| {
            let s = partition.block_range(j).start;
            g.values().view((s, s), (b, b)).into_owned()
        })
        .collect();
    Ok(DiagBlocks { blocks, partition: *partition })
}

/// Smallest ridge keeping `κ I + D/R` positive semidefinite: `max(0, -λ_min(D/R))`.
pub fn ridge_floor(d: &DiagBlocks, r: usize) -> f64 {
    let lambda_min = d
        .blocks
        .iter()
        .map(|b| b.clone().symmetric_eigenvalues().min())
        .fold(f64::INFINITY, f64::min);
    if lambda_min.is_finite() {
        (-lambda_min / r as f64).max(0.0)
    } else {
        0.0
    }
}

/// Off-diagonal part of the whitened correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrMatrix {
    r0: DMatrix<f64>,
    kappa: f64,
    /// Set when the requested ridge was below [`ridge_floor`] and was raised.
    clamped: bool,
    partition: Partition,
}

impl CorrMatrix {
    pub fn r0(&self) -> &DMatrix<f64> {
        &self.r0
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn was_clamped(&self) -> bool {
        self.clamped
    }

    pub fn partition(&self) -> Partition {
        self.partition
    }

    /// `S = R0 / R`.
    pub fn scaled(&self) -> DMatrix<f64> {
        &self.r0 / self.partition.grid_len() as f64
    }

    /// Block spectral norms of `S`, i.e. of the discretised correlation
    /// operators between cells.
    pub fn block_norms(&self) -> BlockNormMatrix {
        block_norms_of(&self.scaled(), &self.partition)
    }
}

/// `[κ I + B/R]^{-1/2}` for a symmetric block, with eigenvalues of `B`
/// clamped at zero. Directions where `κ + λ/R` vanishes are mapped to zero.
fn inv_sqrt_block(block: &DMatrix<f64>, kappa: f64, r: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(block.clone());
    let mapped = eig.eigenvalues.map(|l| {
        let s = kappa + l.max(0.0) / r;
        if s > 0.0 {
            1.0 / s.sqrt()
        } else {
            0.0
        }
    });
    reassemble(&eig.eigenvectors, &mapped)
}

/// `V diag(values) Vᵀ`, exactly symmetric.
pub(crate) fn reassemble(vectors: &DMatrix<f64>, values: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = vectors.clone();
    for (k, &v) in values.iter().enumerate() {
        scaled.column_mut(k).scale_mut(v);
    }
    let mut out = scaled * vectors.transpose();
    crate::kernels::symmetrize_upper(&mut out);
    out
}

/// Computes `R0 = W (K - D) W` with `W = [κ I + D/R]^{-1/2}` built block by
/// block. A ridge below [`ridge_floor`] is raised to the floor plus
/// [`RIDGE_MARGIN`] and reported through [`CorrMatrix::was_clamped`].
pub fn corr_matrix(g: &GramMatrix, partition: &Partition, kappa: f64) -> Result<CorrMatrix> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::Config(format!("ridge must be a nonnegative number, got {kappa}")));
    }
    let d = diag_blocks(g, partition)?;
    let r = partition.grid_len();
    let floor = ridge_floor(&d, r);
    let (kappa, clamped) = if kappa < floor { (floor + RIDGE_MARGIN, true) } else { (kappa, false) };

    let whiten: Vec<DMatrix<f64>> = d
        .blocks
        .iter()
        .map(|b| inv_sqrt_block(b, kappa, r as f64))
        .collect();

    let p = partition.cells();
    let bl = partition.block_len();
    let k = g.values();
    let mut r0 = DMatrix::zeros(r, r);
    for a in 0..p {
        let sa = partition.block_range(a).start;
        for b in (a + 1)..p {
            let sb = partition.block_range(b).start;
            let coupling = k.view((sa, sb), (bl, bl));
            let block = &whiten[a] * coupling * &whiten[b];
            r0.view_mut((sa, sb), (bl, bl)).copy_from(&block);
            r0.view_mut((sb, sa), (bl, bl)).copy_from(&block.transpose());
        }
    }
    Ok(CorrMatrix { r0, kappa, clamped, partition: *partition })
}

/// Discretised precision operator matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecMatrix {
    values: DMatrix<f64>,
    partition: Partition,
    lambda_min: f64,
}

impl PrecMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn partition(&self) -> Partition {
        self.partition
    }

    /// Smallest eigenvalue of `I + S` encountered while inverting.
    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }
}

/// `P = I - (I + S)^{-1} S` with `S = R0/R`, evaluated through the
/// eigendecomposition `S = V diag(μ) Vᵀ` as `I - V diag(μ / (1 + μ)) Vᵀ`.
pub fn precision(c: &CorrMatrix) -> Result<PrecMatrix> {
    let s = c.scaled();
    let n = s.nrows();
    let eig = SymmetricEigen::new(s);
    let lambda_min = 1.0 + eig.eigenvalues.min();
    if !(lambda_min > SINGULARITY_TOL) {
        return Err(Error::Singular { lambda_min });
    }
    let ratio = eig.eigenvalues.map(|mu| mu / (1.0 + mu));
    let mut values = -reassemble(&eig.eigenvectors, &ratio);
    for i in 0..n {
        values[(i, i)] += 1.0;
    }
    Ok(PrecMatrix { values, partition: c.partition, lambda_min })
}

/// `p × p` matrix of block spectral norms.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockNormMatrix {
    norms: DMatrix<f64>,
}

impl BlockNormMatrix {
    pub fn new(norms: DMatrix<f64>) -> Result<Self> {
        if norms.nrows() != norms.ncols() || norms.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "norm matrix must be square and nonempty, got {}x{}",
                norms.nrows(),
                norms.ncols()
            )));
        }
        if norms.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::Config("block norms must be finite and nonnegative".into()));
        }
        Ok(BlockNormMatrix { norms })
    }

    pub fn cells(&self) -> usize {
        self.norms.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.norms[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.norms
    }

    pub fn max(&self) -> f64 {
        self.norms.max()
    }

    pub fn min(&self) -> f64 {
        self.norms.min()
    }

    /// Largest norm among pixels off the diagonal (0 for `p = 1`).
    pub fn max_off_diagonal(&self) -> f64 {
        let p = self.cells();
        let mut m: f64 = 0.0;
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    m = m.max(self.norms[(i, j)]);
                }
            }
        }
        m
    }
}

fn spectral_norm(block: &DMatrix<f64>) -> f64 {
    if block.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    block.singular_values().max()
}

fn block_norms_of(m: &DMatrix<f64>, partition: &Partition) -> BlockNormMatrix {
    let p = partition.cells();
    let bl = partition.block_len();
    let mut norms = DMatrix::zeros(p, p);
    for a in 0..p {
        let sa = partition.block_range(a).start;
        for b in 0..p {
            let sb = partition.block_range(b).start;
            norms[(a, b)] = spectral_norm(&m.view((sa, sb), (bl, bl)).into_owned());
        }
    }
    BlockNormMatrix { norms }
}

/// Largest singular value of every `(R/p) × (R/p)` block of `P`, unweighted.
pub fn block_norms(pm: &PrecMatrix, partition: &Partition) -> Result<BlockNormMatrix> {
    if pm.values.nrows() != partition.grid_len() {
        return Err(Error::DimensionMismatch(format!(
            "precision matrix has R = {} but the partition expects R = {}",
            pm.values.nrows(),
            partition.grid_len()
        )));
    }
    Ok(block_norms_of(&pm.values, partition))
}

/// Gram → correlation → precision → block norms, for a fixed ridge.
pub fn precision_block_norms(g: &GramMatrix, partition: &Partition, kappa: f64) -> Result<BlockNormMatrix> {
    let c = corr_matrix(g, partition, kappa)?;
    let pm = precision(&c)?;
    block_norms(&pm, partition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gram, Grid, KernelKind};
    use crate::partition::make_partition;

    fn g2(c: f64) -> GramMatrix {
        GramMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, c, c, 1.0])).unwrap()
    }

    #[test]
    fn diag_blocks_examples() {
        let part = make_partition(4, 2).unwrap();
        let ones = GramMatrix::from_matrix(DMatrix::from_element(4, 4, 1.0)).unwrap();
        let d = diag_blocks(&ones, &part).unwrap();
        assert_eq!(d.blocks().len(), 2);
        assert!(d.blocks().iter().all(|b| b == &DMatrix::from_element(2, 2, 1.0)));

        let bm = gram(&KernelKind::Brownian, Grid::new(4).unwrap()).unwrap();
        let d = diag_blocks(&bm, &part).unwrap();
        assert_eq!(d.blocks()[0], DMatrix::from_row_slice(2, 2, &[0.125, 0.125, 0.125, 0.375]));
        assert_eq!(d.blocks()[1], DMatrix::from_row_slice(2, 2, &[0.625, 0.625, 0.625, 0.875]));

        let bd = GramMatrix::from_matrix(d.assemble()).unwrap();
        assert_eq!(diag_blocks(&bd, &part).unwrap().assemble(), bd.values().clone());
    }

    #[test]
    fn ridge_floor_examples() {
        let part = make_partition(4, 2).unwrap();
        let psd = gram(&KernelKind::Brownian, Grid::new(4).unwrap()).unwrap();
        assert_eq!(ridge_floor(&diag_blocks(&psd, &part).unwrap(), 4), 0.0);
        let zero = GramMatrix::from_matrix(DMatrix::zeros(4, 4)).unwrap();
        assert_eq!(ridge_floor(&diag_blocks(&zero, &part).unwrap(), 4), 0.0);
        let mut m = DMatrix::identity(4, 4);
        m[(2, 2)] = -0.3;
        let ind = GramMatrix::from_matrix(m).unwrap();
        let f = ridge_floor(&diag_blocks(&ind, &part).unwrap(), 4);
        assert!((f - 0.3 / 4.0).abs() < 1e-15);
        let c = corr_matrix(&ind, &part, 0.0).unwrap();
        assert!(c.was_clamped());
        assert!(c.kappa() >= f + RIDGE_MARGIN);
    }

    #[test]
    fn two_by_two_chain() {
        let part = make_partition(2, 2).unwrap();
        let c = 0.5;
        let corr = corr_matrix(&g2(c), &part, 0.0).unwrap();
        assert!(!corr.was_clamped());
        let expect = DMatrix::from_row_slice(2, 2, &[0.0, 2.0 * c, 2.0 * c, 0.0]);
        assert!((corr.r0() - &expect).amax() < 1e-14);

        let pm = precision(&corr).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]) / 0.75;
        assert!((pm.values() - &expect).amax() < 1e-12);
        let norms = block_norms(&pm, &part).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[4.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 4.0 / 3.0]);
        assert!((norms.matrix() - &expect).amax() < 1e-12);
    }

    #[test]
    fn correlation_is_scale_invariant_without_ridge() {
        let part = make_partition(2, 2).unwrap();
        let a = corr_matrix(&g2(0.3), &part, 0.0).unwrap();
        let scaled = GramMatrix::from_matrix(g2(0.3).values() * 4.0).unwrap();
        let b = corr_matrix(&scaled, &part, 0.0).unwrap();
        assert!((a.r0() - b.r0()).amax() < 1e-14);
    }

    #[test]
    fn block_diagonal_gram_gives_identity() {
        let part = make_partition(12, 3).unwrap();
        let full = gram(&KernelKind::Gaussian, Grid::new(12).unwrap()).unwrap();
        let bd = GramMatrix::from_matrix(diag_blocks(&full, &part).unwrap().assemble()).unwrap();
        let corr = corr_matrix(&bd, &part, 1e-3).unwrap();
        assert!(corr.r0().iter().all(|&x| x == 0.0));
        let pm = precision(&corr).unwrap();
        assert_eq!(pm.values(), &DMatrix::identity(12, 12));
        let norms = block_norms(&pm, &part).unwrap();
        assert_eq!(norms.max_off_diagonal(), 0.0);
        assert!((0..3).all(|i| norms.get(i, i) == 1.0));
    }

    #[test]
    fn singular_correlation_is_reported() {
        // R0 = [[0, -2], [-2, 0]] gives S with eigenvalue -1.
        let part = make_partition(2, 2).unwrap();
        let corr = CorrMatrix {
            r0: DMatrix::from_row_slice(2, 2, &[0.0, -2.0, -2.0, 0.0]),
            kappa: 0.0,
            clamped: false,
            partition: part,
        };
        match precision(&corr) {
            Err(Error::Singular { lambda_min }) => assert!(lambda_min.abs() < 1e-12),
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn rank_one_block_norm() {
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let y = DVector::from_vec(vec![3.0, 0.0, 4.0]);
        let block = &x * y.transpose();
        assert!((spectral_norm(&block) - x.norm() * y.norm()).abs() < 1e-12);
        let mut m = DMatrix::zeros(6, 6);
        m.view_mut((0, 3), (3, 3)).copy_from(&block);
        let part = make_partition(6, 2).unwrap();
        let norms = block_norms_of(&m, &part);
        assert!((norms.get(0, 1) - x.norm() * y.norm()).abs() < 1e-12);
        assert_eq!(norms.get(1, 0), 0.0);
    }

    #[test]
    fn identity_precision_norms() {
        let part = make_partition(6, 3).unwrap();
        let pm = PrecMatrix { values: DMatrix::identity(6, 6), partition: part, lambda_min: 1.0 };
        let n = block_norms(&pm, &part).unwrap();
        assert_eq!(n.matrix(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn inverse_identity_on_kernels() {
        let part = make_partition(120, 12).unwrap();
        for kind in KernelKind::benchmark() {
            let g = gram(&kind, Grid::new(120).unwrap()).unwrap();
            let d = diag_blocks(&g, &part).unwrap();
            let corr = corr_matrix(&g, &part, 1e-4 * d.scaled_norm()).unwrap();
            let pm = precision(&corr).unwrap();
            let s = corr.scaled();
            let resid = pm.values() * (DMatrix::identity(120, 120) + s) - DMatrix::identity(120, 120);
            assert!(resid.amax() < 1e-6, "{kind}: {}", resid.amax());
            assert_eq!(pm.values(), &pm.values().transpose());
        }
    }
}
