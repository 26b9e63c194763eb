//! Ridge selection by k-fold cross-validation and threshold candidates from
//! the density of log block norms.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::ObservationSet;
use crate::operator::{diag_blocks, reassemble, ridge_floor, BlockNormMatrix, DiagBlocks};
use crate::partition::Partition;

/// Number of ridge values in the default grids.
pub const RIDGE_GRID_LEN: usize = 15;

/// Number of points at which the log-norm density is evaluated.
pub const DENSITY_POINTS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RidgeRegime {
    /// `10^{-j} ‖D/R‖`, `j = 0..14`.
    Complete,
    /// `10^{-α} ‖D/R‖`, `α` evenly spaced over `[-1, 2]`.
    Discrete,
}

/// Candidate ridges, largest first.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeGrid {
    values: Vec<f64>,
}

impl RidgeGrid {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Config("ridge grid must be nonempty and strictly positive".into()));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        values.dedup();
        Ok(RidgeGrid { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Ridge grid scaled by the spectral norm of `D/R`.
pub fn lambda_grid(d: &DiagBlocks, regime: RidgeRegime) -> Result<RidgeGrid> {
    let base = d.scaled_norm();
    if !(base > 0.0) || !base.is_finite() {
        return Err(Error::Estimation(
            "diagonal blocks of the covariance estimate vanish; cannot scale a ridge grid".into(),
        ));
    }
    ridge_grid_from_base(base, regime)
}

pub fn ridge_grid_from_base(base: f64, regime: RidgeRegime) -> Result<RidgeGrid> {
    let last = (RIDGE_GRID_LEN - 1) as f64;
    let values = (0..RIDGE_GRID_LEN)
        .map(|j| {
            let j = j as f64;
            let exponent = match regime {
                RidgeRegime::Complete => j,
                RidgeRegime::Discrete => 2.0 * (j / last) - (last - j) / last,
            };
            base * 10f64.powf(-exponent)
        })
        .collect();
    RidgeGrid::new(values)
}

/// Outcome of [`ridge_cv`].
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeChoice {
    /// Selected ridge, at least the floor of the full-data estimate.
    pub kappa: f64,
    /// Fold-averaged criterion for each grid value, in grid order.
    pub criteria: Vec<f64>,
}

/// Contiguous index ranges for `folds` groups over `n` curves.
pub fn fold_ranges(n: usize, folds: usize) -> Vec<std::ops::Range<usize>> {
    (0..folds).map(|s| s * n / folds..(s + 1) * n / folds).collect()
}

struct FoldBlocks {
    held_out: Vec<DMatrix<f64>>,
    /// Eigendecompositions of the training blocks, eigenvalues clamped at 0.
    train: Vec<(DMatrix<f64>, Vec<f64>)>,
}

/// `‖A − A (λI + B)^{-1} A‖` maximised over blocks, where `A` and `B` are the
/// scaled held-out and training blocks.
fn fold_criterion(fold: &FoldBlocks, lambda: f64) -> f64 {
    fold.held_out
        .iter()
        .zip(&fold.train)
        .map(|(a, (vecs, vals))| {
            let inv = reassemble(vecs, &nalgebra::DVector::from_iterator(vals.len(), vals.iter().map(|&v| 1.0 / (lambda + v))));
            let resid = a - a * inv * a;
            let sym = (&resid + resid.transpose()) * 0.5;
            sym.symmetric_eigenvalues().amax()
        })
        .fold(0.0, f64::max)
}

/// Selects the ridge by k-fold cross-validation over contiguous folds.
///
/// For every fold `s` the held-out estimate `A_s = D_s / R` is compared with
/// its ridge reconstruction through the training estimate `B_s = D_{-s} / R`:
/// `‖A_s − A_s (λI + B_s)^{-1} A_s‖`, averaged over folds. Ties go to the
/// larger ridge. The result is raised to the ridge floor of the full-data
/// estimate when needed.
pub fn ridge_cv(
    obs: &ObservationSet,
    partition: &Partition,
    folds: usize,
    grid: &RidgeGrid,
    center: bool,
) -> Result<RidgeChoice> {
    let n = obs.curve_count();
    if folds < 2 {
        return Err(Error::Config(format!("cross-validation needs at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::Config(format!("{n} curves cannot be split into {folds} folds")));
    }
    let r = partition.grid_len() as f64;
    let ranges = fold_ranges(n, folds);
    let scaled_blocks = |idx: &[usize]| -> Result<Vec<DMatrix<f64>>> {
        let est = obs.estimate_subset(idx, center)?;
        let d = diag_blocks(&est.gram, partition)?;
        Ok(d.blocks().iter().map(|b| b / r).collect())
    };

    let fold_data = ranges
        .iter()
        .map(|range| {
            let inside: Vec<usize> = range.clone().collect();
            let outside: Vec<usize> = (0..n).filter(|k| !range.contains(k)).collect();
            let held_out = scaled_blocks(&inside)?;
            let train = scaled_blocks(&outside)?
                .into_iter()
                .map(|b| {
                    let eig = SymmetricEigen::new(b);
                    let vals = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
                    (eig.eigenvectors, vals)
                })
                .collect();
            Ok(FoldBlocks { held_out, train })
        })
        .collect::<Result<Vec<_>>>()?;

    let criteria: Vec<f64> = grid
        .values()
        .par_iter()
        .map(|&lambda| fold_data.iter().map(|f| fold_criterion(f, lambda)).sum::<f64>() / folds as f64)
        .collect();

    // Grid is sorted descending, so the first minimum is the largest ridge.
    let mut best = 0;
    for (k, &c) in criteria.iter().enumerate() {
        if c < criteria[best] {
            best = k;
        }
    }
    if !criteria[best].is_finite() {
        return Err(Error::Estimation("cross-validation criterion is not finite".into()));
    }
    let full = obs.estimate(center)?;
    let floor = ridge_floor(&diag_blocks(&full.gram, partition)?, partition.grid_len());
    let kappa = grid.values()[best].max(floor + if floor > 0.0 { crate::operator::RIDGE_MARGIN } else { 0.0 });
    Ok(RidgeChoice { kappa, criteria })
}

/// Threshold suggestions read off the density of `log10` block norms.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdCandidates {
    /// Thresholds at interior local minima of the density, ascending.
    pub minima: Vec<f64>,
    /// Thresholds at curvature peaks right of the main mode, ascending.
    pub elbows: Vec<f64>,
    /// `(log10 ρ, density)` samples.
    pub density_curve: Vec<(f64, f64)>,
    /// Density value at each entry of `minima`.
    pub minima_density: Vec<f64>,
    pub bandwidth: f64,
    /// Norms equal to zero, left out of the logarithm.
    pub zero_count: usize,
}

/// R-style type-7 quantile of sorted data.
fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule of thumb, `0.9 min(sd, IQR/1.34) n^{-1/5}`, with the
/// usual fallbacks when the spread estimate vanishes.
pub fn silverman_bandwidth(data: &[f64]) -> f64 {
    let n = data.len();
    if n < 2 {
        return 1.0;
    }
    let mean = data.iter().sum::<f64>() / n as f64;
    let sd = (data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let mut lo = sd.min(iqr / 1.34);
    if lo <= 0.0 {
        lo = if sd > 0.0 {
            sd
        } else if data[0] != 0.0 {
            data[0].abs()
        } else {
            1.0
        };
    }
    0.9 * lo * (n as f64).powf(-0.2)
}

/// Gaussian kernel density estimate evaluated at `xs`.
pub fn gaussian_kde(data: &[f64], bandwidth: f64, xs: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (data.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    xs.iter()
        .map(|&x| {
            data.iter()
                .map(|&d| {
                    let z = (x - d) / bandwidth;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect()
}

/// Proposes thresholds from the density of `{log10 ‖P_ij‖ : 1 ≤ i, j ≤ p}`.
///
/// Zero norms are excluded (and counted). Fewer than two distinct values
/// yield empty candidate lists. Candidates are restricted to lie strictly
/// between the smallest and largest positive norm.
pub fn threshold_candidates(norms: &BlockNormMatrix) -> ThresholdCandidates {
    let mut logs = Vec::with_capacity(norms.cells() * norms.cells());
    let mut zero_count = 0;
    for &v in norms.matrix().iter() {
        if v > 0.0 && v.is_finite() {
            logs.push(v.log10());
        } else {
            zero_count += 1;
        }
    }
    let mut out = ThresholdCandidates {
        minima: Vec::new(),
        elbows: Vec::new(),
        density_curve: Vec::new(),
        minima_density: Vec::new(),
        bandwidth: 0.0,
        zero_count,
    };
    let mut distinct = logs.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return out;
    }
    let (lo, hi) = (distinct[0], distinct[distinct.len() - 1]);
    let h = silverman_bandwidth(&logs);
    let (start, end) = (lo - 3.0 * h, hi + 3.0 * h);
    let step = (end - start) / (DENSITY_POINTS - 1) as f64;
    let xs: Vec<f64> = (0..DENSITY_POINTS).map(|k| start + k as f64 * step).collect();
    let f = gaussian_kde(&logs, h, &xs);

    let inside = |x: f64| x > lo && x < hi;
    // A flat run counts as one minimum at its midpoint. Runs appear when the
    // density underflows to zero between well separated clusters.
    let mut k = 1;
    while k < DENSITY_POINTS - 1 {
        let mut end = k;
        while end + 1 < DENSITY_POINTS && f[end + 1] == f[k] {
            end += 1;
        }
        if end + 1 < DENSITY_POINTS && f[k] < f[k - 1] && f[k] < f[end + 1] {
            let mid = (k + end) / 2;
            if inside(xs[mid]) {
                out.minima.push(10f64.powf(xs[mid]));
                out.minima_density.push(f[mid]);
            }
        }
        k = end + 1;
    }
    let mode = (0..DENSITY_POINTS).fold(0, |best, k| if f[k] > f[best] { k } else { best });
    let curvature: Vec<f64> = (1..DENSITY_POINTS - 1).map(|k| f[k - 1] - 2.0 * f[k] + f[k + 1]).collect();
    for c in 1..curvature.len() - 1 {
        let k = c + 1;
        if k > mode && curvature[c] > curvature[c - 1] && curvature[c] > curvature[c + 1] && inside(xs[k]) {
            out.elbows.push(10f64.powf(xs[k]));
        }
    }
    out.density_curve = xs.into_iter().zip(f).collect();
    out.bandwidth = h;
    out
}

impl ThresholdCandidates {
    /// The local minimum with the lowest density, if any.
    pub fn deepest_minimum(&self) -> Option<f64> {
        self.minima
            .iter()
            .zip(&self.minima_density)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(&rho, _)| rho)
    }
}
