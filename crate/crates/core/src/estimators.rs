//! Covariance estimators for complete, regularly sampled, sparsely sampled,
//! and partially missing curves.
//!
//! All estimators accumulate over curves in ascending index order and return
//! exactly symmetric matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernels::{symmetrize_upper, GramMatrix};
use crate::operator::reassemble;

/// One observation `(t, y)` of a sparsely sampled curve.
pub type Triplet = (f64, f64);

/// Curves in one of the supported observation regimes.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservationSet {
    /// `n × R` curves on the midpoint grid.
    Complete { samples: DMatrix<f64> },
    /// `n × (M + 1)` noisy values on the endpoint grid `l / M`.
    Regular { obs: DMatrix<f64> },
    /// Per-curve `(t, y)` lists, binned into `bins` intervals and expanded to
    /// an `grid`-point output.
    Sparse { curves: Vec<Vec<Triplet>>, bins: usize, grid: usize },
    /// `n × R` curves where `NaN` marks a missing value.
    PairwiseMissing { samples: DMatrix<f64> },
}

/// Covariance estimate plus the number of curves that could not be used.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub gram: GramMatrix,
    pub skipped_curves: usize,
}

impl ObservationSet {
    pub fn curve_count(&self) -> usize {
        match self {
            ObservationSet::Complete { samples } | ObservationSet::PairwiseMissing { samples } => samples.nrows(),
            ObservationSet::Regular { obs } => obs.nrows(),
            ObservationSet::Sparse { curves, .. } => curves.len(),
        }
    }

    /// Size `R` of the estimated Gram matrix.
    pub fn output_dim(&self) -> usize {
        match self {
            ObservationSet::Complete { samples } | ObservationSet::PairwiseMissing { samples } => samples.ncols(),
            ObservationSet::Regular { obs } => obs.ncols().saturating_sub(1),
            ObservationSet::Sparse { grid, .. } => *grid,
        }
    }

    pub fn estimate(&self, center: bool) -> Result<Estimate> {
        let all: Vec<usize> = (0..self.curve_count()).collect();
        self.estimate_subset(&all, center)
    }

    /// Estimate from the curves listed in `indices`, in that order.
    pub fn estimate_subset(&self, indices: &[usize], center: bool) -> Result<Estimate> {
        match self {
            ObservationSet::Complete { samples } => {
                let sub = select_rows(samples, indices);
                let gram = if center { empirical_cov_centered(&sub)? } else { empirical_cov(&sub)? };
                Ok(Estimate { gram, skipped_curves: 0 })
            }
            ObservationSet::Regular { obs } => {
                let mut sub = select_rows(obs, indices);
                if center {
                    center_columns(&mut sub);
                }
                Ok(Estimate { gram: regular_cov(&sub)?, skipped_curves: 0 })
            }
            ObservationSet::Sparse { curves, bins, grid } => {
                if center {
                    return Err(Error::Config("centering is not supported for sparse observations".into()));
                }
                let sub: Vec<Vec<Triplet>> = indices.iter().map(|&k| curves[k].clone()).collect();
                let est = sparse_cov(&sub, *bins, *grid)?;
                Ok(Estimate { gram: est.gram, skipped_curves: est.skipped_curves })
            }
            ObservationSet::PairwiseMissing { samples } => {
                let mut sub = select_rows(samples, indices);
                if center {
                    center_columns(&mut sub);
                }
                Ok(Estimate { gram: pairwise_cov(&sub)?, skipped_curves: 0 })
            }
        }
    }
}

fn select_rows(m: &DMatrix<f64>, indices: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(indices.len(), m.ncols(), |k, j| m[(indices[k], j)])
}

/// Subtracts from every column the mean of its non-missing entries.
fn center_columns(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let (mut sum, mut count) = (0.0, 0usize);
        for &x in col.iter() {
            if !x.is_nan() {
                sum += x;
                count += 1;
            }
        }
        if count > 0 {
            let mean = sum / count as f64;
            col.iter_mut().filter(|x| !x.is_nan()).for_each(|x| *x -= mean);
        }
    }
}

/// `(1/n) Σ_k x_k x_kᵀ`, uncentered.
pub fn empirical_cov(samples: &DMatrix<f64>) -> Result<GramMatrix> {
    let n = samples.nrows();
    if n == 0 {
        return Err(Error::Estimation("empirical covariance needs at least one curve".into()));
    }
    let r = samples.ncols();
    let mut acc = DMatrix::zeros(r, r);
    let mut row = vec![0.0; r];
    for k in 0..n {
        for (j, x) in row.iter_mut().enumerate() {
            *x = samples[(k, j)];
        }
        for j in 0..r {
            let xj = row[j];
            let mut col = acc.column_mut(j);
            for i in 0..=j {
                col[i] += row[i] * xj;
            }
        }
    }
    acc /= n as f64;
    GramMatrix::from_matrix(acc)
}

/// Empirical covariance after subtracting the column means.
pub fn empirical_cov_centered(samples: &DMatrix<f64>) -> Result<GramMatrix> {
    let mut centered = samples.clone();
    center_columns(&mut centered);
    empirical_cov(&centered)
}

/// Covariance of curves observed at `M + 1` equispaced points including both
/// endpoints, reported as an `M × M` piecewise-constant matrix.
///
/// Cell `(u, v)` averages the raw second moments `F[u+i][v+j]`, `i, j ∈ {0, 1}`,
/// skipping those on the diagonal of `F`, where the measurement noise sits.
pub fn regular_cov(obs: &DMatrix<f64>) -> Result<GramMatrix> {
    if obs.nrows() == 0 {
        return Err(Error::Estimation("regular estimator needs at least one curve".into()));
    }
    if obs.ncols() < 3 {
        return Err(Error::Estimation(format!(
            "regular estimator needs M >= 2 grid intervals, got {}",
            obs.ncols().saturating_sub(1)
        )));
    }
    let f = empirical_cov(obs)?;
    let f = f.values();
    let m = obs.ncols() - 1;
    let mut out = DMatrix::zeros(m, m);
    for v in 0..m {
        for u in 0..=v {
            let (mut sum, mut count) = (0.0, 0u32);
            for i in 0..2 {
                for j in 0..2 {
                    if u + i != v + j {
                        sum += f[(u + i, v + j)];
                        count += 1;
                    }
                }
            }
            out[(u, v)] = sum / count as f64;
        }
    }
    GramMatrix::from_matrix(out)
}

/// Result of [`sparse_cov`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEstimate {
    pub gram: GramMatrix,
    /// `M × M` raw bin moments before the `M²` rescaling.
    pub bin_moments: DMatrix<f64>,
    /// Curves with fewer than two observations, excluded from the average.
    pub skipped_curves: usize,
}

fn bin_of(t: f64, bins: usize) -> usize {
    ((t * bins as f64).floor() as usize).min(bins - 1)
}

/// Binned cross-product estimator for sparsely observed curves.
///
/// For bins `I_1..I_M` of `[0, 1]` it averages, per curve, the products
/// `y_i y_j` over ordered pairs `i ≠ j` landing in `I_p × I_q`, divided by
/// `i_k (i_k - 1)`. The output on the `grid`-point midpoint grid is `M²`
/// times that bin moment.
pub fn sparse_cov(curves: &[Vec<Triplet>], bins: usize, grid: usize) -> Result<SparseEstimate> {
    if bins < 2 {
        return Err(Error::Config(format!("sparse estimator needs M >= 2 bins, got {bins}")));
    }
    if grid == 0 || !grid.is_multiple_of(bins) {
        return Err(Error::Config(format!("bin count M = {bins} does not divide grid size R = {grid}")));
    }
    let mut moments = DMatrix::zeros(bins, bins);
    let mut used = 0usize;
    let mut skipped = 0usize;
    let mut idx = Vec::new();
    for (k, curve) in curves.iter().enumerate() {
        if let Some(&(t, y)) = curve.iter().find(|(t, y)| !(0.0..=1.0).contains(t) || !y.is_finite()) {
            return Err(Error::Estimation(format!("curve {k}: invalid observation (t = {t}, y = {y})")));
        }
        let ik = curve.len();
        if ik < 2 {
            skipped += 1;
            continue;
        }
        used += 1;
        let w = 1.0 / (ik * (ik - 1)) as f64;
        idx.clear();
        idx.extend(curve.iter().map(|&(t, _)| bin_of(t, bins)));
        for (a, &(_, ya)) in curve.iter().enumerate() {
            for (b, &(_, yb)) in curve.iter().enumerate() {
                if a != b {
                    moments[(idx[a], idx[b])] += w * ya * yb;
                }
            }
        }
    }
    if used == 0 {
        return Err(Error::Estimation(format!(
            "no curve has two or more observations ({skipped} skipped)"
        )));
    }
    moments /= used as f64;
    symmetrize_upper(&mut moments);
    let per_bin = grid / bins;
    let scale = (bins * bins) as f64;
    let values = DMatrix::from_fn(grid, grid, |i, j| scale * moments[(i / per_bin, j / per_bin)]);
    Ok(SparseEstimate { gram: GramMatrix::from_matrix(values)?, bin_moments: moments, skipped_curves: skipped })
}

/// Entry `(i, j)` averages `x_k(u_i) x_k(u_j)` over the curves observing
/// both points; `NaN` marks a missing value.
pub fn pairwise_cov(samples: &DMatrix<f64>) -> Result<GramMatrix> {
    let n = samples.nrows();
    let r = samples.ncols();
    if n == 0 {
        return Err(Error::Estimation("pairwise covariance needs at least one curve".into()));
    }
    let mut acc = DMatrix::zeros(r, r);
    let mut counts = vec![0usize; r * r];
    let mut row = vec![0.0; r];
    for k in 0..n {
        for (j, x) in row.iter_mut().enumerate() {
            *x = samples[(k, j)];
        }
        for j in 0..r {
            let xj = row[j];
            if xj.is_nan() {
                continue;
            }
            let mut col = acc.column_mut(j);
            for i in 0..=j {
                if !row[i].is_nan() {
                    col[i] += row[i] * xj;
                    counts[j * r + i] += 1;
                }
            }
        }
    }
    for j in 0..r {
        for i in 0..=j {
            let c = counts[j * r + i];
            if c == 0 {
                return Err(Error::Estimation(format!(
                    "grid points {i} and {j} are never observed together"
                )));
            }
            acc[(i, j)] /= c as f64;
        }
    }
    GramMatrix::from_matrix(acc)
}

/// Nearest positive semidefinite matrix: negative eigenvalues set to zero.
pub fn psd_project(g: &GramMatrix) -> GramMatrix {
    let eig = SymmetricEigen::new(g.values().clone());
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    GramMatrix::from_matrix(reassemble(&eig.eigenvectors, &clipped)).expect("square input")
}

/// Standard deviation `sqrt(eta · tr K)` of measurement noise, with the
/// operator trace `(1/R) Σ K(u_i, u_i)`.
pub fn noise_sd(eta: f64, gram: &GramMatrix) -> Result<f64> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::Config(format!("noise level must be nonnegative, got {eta}")));
    }
    Ok((eta * gram.operator_trace()).max(0.0).sqrt())
}

/// Adds i.i.d. `N(0, sd²)` to every non-missing entry, row by row.
pub fn add_noise_in_place<G: Rng + ?Sized>(samples: &mut DMatrix<f64>, sd: f64, rng: &mut G) {
    if sd == 0.0 {
        return;
    }
    for k in 0..samples.nrows() {
        for j in 0..samples.ncols() {
            let x = &mut samples[(k, j)];
            if !x.is_nan() {
                *x += sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
}

/// Adds `N(0, eta · tr K)` noise to every retained observation.
pub fn add_noise(samples: &DMatrix<f64>, eta: f64, gram: &GramMatrix, seed: u64) -> Result<DMatrix<f64>> {
    let sd = noise_sd(eta, gram)?;
    let mut out = samples.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    add_noise_in_place(&mut out, sd, &mut rng);
    Ok(out)
}
