//! Benchmark covariance kernels on `[0, 1]`, their Gram matrices on the
//! midpoint grid, and Gaussian path sampling.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// One of the five benchmark covariances.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind {
    /// `exp(-(u - v)^2)`.
    Gaussian,
    /// `min(u, v)`.
    Brownian,
    /// Covariance of `X_t = ∫_{max(0, t - 1/2)}^{t} W_s ds`.
    IntegratedBrownian,
    /// Mixture of triangular (Pólya) functions `Σ w_k Δ_{h_k}(u - v)`.
    Polya { components: Vec<PolyaComponent> },
    /// Linear interpolation of a random vector with covariance `alpha^{|i-j|}`
    /// placed on the lattice `0, 1/q, ..., 1`.
    InterpolatedKms { alpha: f64, q: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyaComponent {
    pub weight: f64,
    pub width: f64,
}

impl KernelKind {
    /// `0.8 Δ_{0.7} + 0.2 Δ_{0.8}`.
    pub fn polya() -> Self {
        KernelKind::Polya {
            components: vec![
                PolyaComponent { weight: 0.8, width: 0.7 },
                PolyaComponent { weight: 0.2, width: 0.8 },
            ],
        }
    }

    /// KMS interpolation with `alpha = 0.3`, `q = 10`.
    pub fn kms() -> Self {
        KernelKind::InterpolatedKms { alpha: 0.3, q: 10 }
    }

    /// The five benchmark kernels in their conventional order.
    pub fn benchmark() -> [KernelKind; 5] {
        [
            KernelKind::Gaussian,
            KernelKind::Brownian,
            KernelKind::IntegratedBrownian,
            KernelKind::polya(),
            KernelKind::kms(),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelKind::Polya { components } => {
                if components.is_empty() {
                    return Err(Error::Domain("Pólya kernel needs at least one component".into()));
                }
                let mut total = 0.0;
                for c in components {
                    if !(c.width > 0.0) {
                        return Err(Error::Domain(format!("Pólya width must be positive, got {}", c.width)));
                    }
                    if !(c.weight >= 0.0) {
                        return Err(Error::Domain(format!("Pólya weight must be nonnegative, got {}", c.weight)));
                    }
                    total += c.weight;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Domain(format!("Pólya weights must sum to 1, got {total}")));
                }
                Ok(())
            }
            KernelKind::InterpolatedKms { alpha, q } => {
                if !(*alpha > -1.0 && *alpha < 1.0) {
                    return Err(Error::Domain(format!("KMS alpha must lie in (-1, 1), got {alpha}")));
                }
                if *q == 0 {
                    return Err(Error::Domain("KMS lattice size q must be positive".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Short identifier used in configuration files and tables.
    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Gaussian => "gaussian",
            KernelKind::Brownian => "brownian",
            KernelKind::IntegratedBrownian => "integrated-brownian",
            KernelKind::Polya { .. } => "polya",
            KernelKind::InterpolatedKms { .. } => "kms",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "k1" => Ok(KernelKind::Gaussian),
            "brownian" | "k2" => Ok(KernelKind::Brownian),
            "integrated-brownian" | "integrated_brownian" | "ibm" | "k3" => {
                Ok(KernelKind::IntegratedBrownian)
            }
            "polya" | "k4" => Ok(KernelKind::polya()),
            "kms" | "interpolated-kms" | "k5" => Ok(KernelKind::kms()),
            other => Err(Error::Config(format!("unknown kernel `{other}`"))),
        }
    }
}

/// Uniform grid of `R` cell midpoints `(i + 1/2) / R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    r: usize,
}

impl Grid {
    pub fn new(r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::Config("grid size R must be positive".into()));
        }
        Ok(Grid { r })
    }

    pub fn len(&self) -> usize {
        self.r
    }

    pub fn is_empty(&self) -> bool {
        self.r == 0
    }

    pub fn point(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.r as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.r).map(|i| self.point(i)).collect()
    }
}

/// Symmetric `R × R` discretisation of a covariance on a midpoint grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    values: DMatrix<f64>,
    grid: Grid,
}

impl GramMatrix {
    /// Wraps a square matrix, mirroring the upper triangle so that the result
    /// is exactly symmetric.
    pub fn from_matrix(mut values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "Gram matrix must be square, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        let grid = Grid::new(values.nrows())?;
        symmetrize_upper(&mut values);
        Ok(GramMatrix { values, grid })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    /// Operator trace `∫ K(u, u) du ≈ (1/R) Σ K(u_i, u_i)`.
    pub fn operator_trace(&self) -> f64 {
        self.values.trace() / self.dim() as f64
    }
}

pub(crate) fn symmetrize_upper(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            m[(i, j)] = m[(j, i)];
        }
    }
}

fn check_unit(x: f64, name: &str) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {x} lies outside [0, 1]")))
    }
}

/// `∫_0^x ∫_0^y min(s, t) dt ds`.
fn min_antiderivative(x: f64, y: f64) -> f64 {
    let (a, b) = if x <= y { (x, y) } else { (y, x) };
    a * a * b / 2.0 - a * a * a / 6.0
}

fn integrated_brownian(u: f64, v: f64) -> f64 {
    let (u0, v0) = ((u - 0.5).max(0.0), (v - 0.5).max(0.0));
    min_antiderivative(u, v) - min_antiderivative(u0, v) - min_antiderivative(u, v0)
        + min_antiderivative(u0, v0)
}

fn triangle(t: f64, width: f64) -> f64 {
    (1.0 - (t / width).abs()).max(0.0)
}

fn kms(alpha: f64, q: u32, u: f64, v: f64) -> f64 {
    let q = q as f64;
    let (su, sv) = (u * q, v * q);
    let (i, j) = (su.floor(), sv.floor());
    let (du, dv) = (su - i, sv - j);
    let pow = |d: f64| alpha.powi(d.abs() as i32);
    (1.0 - du) * (1.0 - dv) * pow(i - j)
        + (1.0 - du) * dv * pow(i - j - 1.0)
        + du * (1.0 - dv) * pow(i + 1.0 - j)
        + du * dv * pow(i - j)
}

/// Evaluates `K(u, v)` for `u, v ∈ [0, 1]`.
pub fn eval_kernel(kind: &KernelKind, u: f64, v: f64) -> Result<f64> {
    check_unit(u, "u")?;
    check_unit(v, "v")?;
    kind.validate()?;
    Ok(eval_unchecked(kind, u, v))
}

fn eval_unchecked(kind: &KernelKind, u: f64, v: f64) -> f64 {
    // Argument order fixed so that K(u, v) == K(v, u) bit for bit.
    let (u, v) = if u <= v { (u, v) } else { (v, u) };
    match kind {
        KernelKind::Gaussian => (-(u - v) * (u - v)).exp(),
        KernelKind::Brownian => u.min(v),
        KernelKind::IntegratedBrownian => integrated_brownian(u, v),
        KernelKind::Polya { components } => components
            .iter()
            .map(|c| c.weight * triangle(u - v, c.width))
            .sum(),
        KernelKind::InterpolatedKms { alpha, q } => kms(*alpha, *q, u, v),
    }
}

/// Kernel matrix `[K(t_i, t_j)]` at arbitrary points in `[0, 1]`.
pub fn kernel_matrix(kind: &KernelKind, points: &[f64]) -> Result<DMatrix<f64>> {
    kind.validate()?;
    for &t in points {
        check_unit(t, "grid point")?;
    }
    let n = points.len();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            m[(i, j)] = eval_unchecked(kind, points[i], points[j]);
        }
    }
    symmetrize_upper(&mut m);
    Ok(m)
}

/// `[K(u_i, u_j)]` on the midpoint grid.
pub fn gram(kind: &KernelKind, grid: Grid) -> Result<GramMatrix> {
    let values = kernel_matrix(kind, &grid.points())?;
    Ok(GramMatrix { values, grid })
}

/// Draws zero-mean Gaussian vectors whose covariance is a symmetric matrix
/// with its negative eigenvalues clipped to zero.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    /// `V diag(sqrt(max(λ, 0)))`, stored transposed for row-major products.
    factor_t: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != cov.ncols() {
            return Err(Error::DimensionMismatch("covariance must be square".into()));
        }
        let sym = (cov + cov.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let mut factor = eig.eigenvectors;
        for (k, lambda) in eig.eigenvalues.iter().enumerate() {
            let s = lambda.max(0.0).sqrt();
            factor.column_mut(k).scale_mut(s);
        }
        Ok(GaussianSampler { factor_t: factor.transpose() })
    }

    pub fn dim(&self) -> usize {
        self.factor_t.ncols()
    }

    /// `n × R` matrix whose rows are independent draws.
    pub fn sample<G: Rng + ?Sized>(&self, n: usize, rng: &mut G) -> DMatrix<f64> {
        let r = self.dim();
        let z = DMatrix::from_row_iterator(n, r, (0..n * r).map(|_| rng.sample::<f64, _>(StandardNormal)));
        z * &self.factor_t
    }
}

/// `n` i.i.d. paths from `N(0, gram)` on the gram's grid, reproducible from `seed`.
pub fn sample_paths(gram: &GramMatrix, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let sampler = GaussianSampler::new(gram.values())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sampler.sample(n, &mut rng))
}
