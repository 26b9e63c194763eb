//! Monte Carlo evaluation of the recovery pipeline on the benchmark kernels.
//!
//! Each replicate draws its own curves from a seed derived from the master
//! seed and the replicate index, so results do not depend on how replicates
//! are scheduled across threads.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{add_noise_in_place, noise_sd, ObservationSet, Triplet};
use crate::kernels::{gram, kernel_matrix, GaussianSampler, Grid, KernelKind};
use crate::operator::{diag_blocks, precision_block_norms, BlockNormMatrix};
use crate::partition::{make_partition, pixelate_truth, PixelGraph, TruthSpec};
use crate::recovery::{auc, roc, threshold_graph};
use crate::tuning::{lambda_grid, ridge_cv, threshold_candidates, RidgeRegime};

/// Ridge used for population recovery, relative to `‖D/R‖`.
pub const POPULATION_RIDGE_SCALE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Complete,
    Regular,
    Sparse,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Complete => "complete",
            Regime::Regular => "regular",
            Regime::Sparse => "sparse",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "complete" => Ok(Regime::Complete),
            "regular" => Ok(Regime::Regular),
            "sparse" => Ok(Regime::Sparse),
            other => Err(Error::Config(format!("unknown regime `{other}`"))),
        }
    }
}

/// One cell of a simulation table.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kernel: KernelKind,
    pub regime: Regime,
    /// Curves per replicate.
    pub n: usize,
    /// Grid size `R`. The regular regime observes `R + 1` endpoint values.
    pub grid: usize,
    /// Partition size `p`.
    pub partition: usize,
    /// Noise variance relative to the operator trace of the kernel.
    pub noise: f64,
    /// Bin count `M` of the sparse estimator.
    pub bins: usize,
    /// Observations kept per curve in the sparse regime.
    pub per_curve: usize,
    pub reps: usize,
    pub seed: u64,
    pub folds: usize,
}

impl ExperimentConfig {
    /// Defaults for everything but the kernel, regime, sample size and partition.
    pub fn new(kernel: KernelKind, regime: Regime, n: usize, partition: usize) -> Self {
        ExperimentConfig {
            kernel,
            regime,
            n,
            grid: 600,
            partition,
            noise: 0.0,
            bins: 20,
            per_curve: 5,
            reps: 20,
            seed: 1,
            folds: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        make_partition(self.grid, self.partition)?;
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        if self.n < self.folds {
            return Err(Error::Config(format!("n = {} is smaller than folds = {}", self.n, self.folds)));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(Error::Config(format!("noise must be nonnegative, got {}", self.noise)));
        }
        if self.regime == Regime::Sparse {
            if self.bins < 2 || !self.grid.is_multiple_of(self.bins) {
                return Err(Error::Config(format!(
                    "bins = {} must be at least 2 and divide grid = {}",
                    self.bins, self.grid
                )));
            }
            if self.per_curve < 2 || self.per_curve > self.grid {
                return Err(Error::Config(format!(
                    "per_curve = {} must lie in [2, grid = {}]",
                    self.per_curve, self.grid
                )));
            }
        }
        Ok(())
    }

    pub const CSV_FIELDS: &'static str = "kernel,regime,n,grid,partition,noise,bins,per_curve,reps,seed,folds";

    fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.kernel,
            self.regime,
            self.n,
            self.grid,
            self.partition,
            self.noise,
            self.bins,
            self.per_curve,
            self.reps,
            self.seed,
            self.folds
        )
    }
}

/// Graph recovered from the exact kernel, with the tuning values used.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationGraph {
    pub graph: PixelGraph,
    pub norms: BlockNormMatrix,
    pub kappa: f64,
    pub rho: f64,
}

/// Runs the recovery pipeline on the exact Gram matrix of `kind`.
///
/// `kappa` defaults to `1e-8 ‖D/R‖`. `rho` defaults to the deepest valley of
/// the log-norm density.
pub fn population_recovery(
    kind: &KernelKind,
    r: usize,
    p: usize,
    kappa: Option<f64>,
    rho: Option<f64>,
) -> Result<PopulationGraph> {
    let partition = make_partition(r, p)?;
    let g = gram(kind, Grid::new(r)?)?;
    let kappa = match kappa {
        Some(k) => k,
        None => POPULATION_RIDGE_SCALE * diag_blocks(&g, &partition)?.scaled_norm(),
    };
    let norms = precision_block_norms(&g, &partition, kappa)?;
    let rho = match rho {
        Some(rho) => rho,
        None => threshold_candidates(&norms).deepest_minimum().ok_or_else(|| {
            Error::Estimation(format!("no density valley in the population norms of the {kind} kernel"))
        })?,
    };
    if !(rho > 0.0) {
        return Err(Error::Config(format!("threshold must be positive, got {rho}")));
    }
    Ok(PopulationGraph { graph: threshold_graph(&norms, rho), norms, kappa, rho })
}

/// Reference graph used to score a kernel: analytic where the continuum graph
/// is known exactly, population recovery otherwise.
pub fn reference_graph(kind: &KernelKind, r: usize, p: usize) -> Result<PixelGraph> {
    match kind {
        KernelKind::IntegratedBrownian | KernelKind::Polya { .. } => {
            Ok(population_recovery(kind, r, p, None, None)?.graph)
        }
        _ => Ok(pixelate_truth(&TruthSpec::for_kernel(kind), &make_partition(r, p)?)),
    }
}

/// Aggregated replicate AUCs for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub config: ExperimentConfig,
    pub median_auc: f64,
    /// Mean absolute deviation about the median.
    pub mad_auc: f64,
    pub per_rep_aucs: Vec<f64>,
}

/// Median and mean absolute deviation about the median.
pub fn summarize(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Config("cannot summarize an empty list".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let median = if m % 2 == 1 { sorted[m / 2] } else { (sorted[m / 2 - 1] + sorted[m / 2]) / 2.0 };
    let mad = values.iter().map(|v| (v - median).abs()).sum::<f64>() / m as f64;
    Ok((median, mad))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replicate `index` under master seed `seed`.
pub fn replicate_seed(seed: u64, index: usize) -> u64 {
    splitmix64(seed ^ splitmix64(index as u64))
}

struct Model {
    sampler: GaussianSampler,
    noise_sd: f64,
    truth: PixelGraph,
}

impl Model {
    fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let k = gram(&cfg.kernel, Grid::new(cfg.grid)?)?;
        let cov = match cfg.regime {
            Regime::Regular => {
                let points: Vec<f64> = (0..=cfg.grid).map(|l| l as f64 / cfg.grid as f64).collect();
                kernel_matrix(&cfg.kernel, &points)?
            }
            Regime::Complete | Regime::Sparse => k.values().clone(),
        };
        Ok(Model {
            sampler: GaussianSampler::new(&cov)?,
            noise_sd: noise_sd(cfg.noise, &k)?,
            truth: reference_graph(&cfg.kernel, cfg.grid, cfg.partition)?,
        })
    }
}

fn observe<G: Rng>(cfg: &ExperimentConfig, model: &Model, rng: &mut G) -> ObservationSet {
    let mut paths = model.sampler.sample(cfg.n, rng);
    match cfg.regime {
        Regime::Complete => {
            add_noise_in_place(&mut paths, model.noise_sd, rng);
            ObservationSet::Complete { samples: paths }
        }
        Regime::Regular => {
            add_noise_in_place(&mut paths, model.noise_sd, rng);
            ObservationSet::Regular { obs: paths }
        }
        Regime::Sparse => {
            let r = cfg.grid;
            let curves = (0..cfg.n)
                .map(|k| {
                    index::sample(rng, r, cfg.per_curve)
                        .into_iter()
                        .map(|i| {
                            let noise = model.noise_sd * rng.sample::<f64, _>(StandardNormal);
                            ((i as f64 + 0.5) / r as f64, paths[(k, i)] + noise)
                        })
                        .collect::<Vec<Triplet>>()
                })
                .collect();
            ObservationSet::Sparse { curves, bins: cfg.bins, grid: r }
        }
    }
}

/// Norm matrix of one replicate, with the cross-validated ridge.
fn replicate_norms(cfg: &ExperimentConfig, model: &Model, index: usize) -> Result<(BlockNormMatrix, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(cfg.seed, index));
    let obs = observe(cfg, model, &mut rng);
    let partition = make_partition(cfg.grid, cfg.partition)?;
    let est = obs.estimate(false)?.gram;
    let regime = match cfg.regime {
        Regime::Complete => RidgeRegime::Complete,
        Regime::Regular | Regime::Sparse => RidgeRegime::Discrete,
    };
    let grid = lambda_grid(&diag_blocks(&est, &partition)?, regime)?;
    let kappa = ridge_cv(&obs, &partition, cfg.folds, &grid, false)?.kappa;
    Ok((precision_block_norms(&est, &partition, kappa)?, kappa))
}

/// Runs every replicate of `cfg` and aggregates the AUCs.
pub fn run_config(cfg: &ExperimentConfig) -> Result<SummaryRow> {
    cfg.validate()?;
    let model = Model::build(cfg)?;
    let results: Vec<Result<f64>> = (0..cfg.reps)
        .into_par_iter()
        .map(|k| {
            let (norms, _) = replicate_norms(cfg, &model, k)?;
            Ok(auc(&roc(&norms, &model.truth)?))
        })
        .collect();
    let mut aucs = Vec::with_capacity(cfg.reps);
    for (index, r) in results.into_iter().enumerate() {
        aucs.push(r.map_err(|e| Error::Replicate { index, source: Box::new(e) })?);
    }
    let (median_auc, mad_auc) = summarize(&aucs)?;
    Ok(SummaryRow { config: cfg.clone(), median_auc, mad_auc, per_rep_aucs: aucs })
}

/// Comma-separated summary table, one row per configuration.
pub fn summary_table(rows: &[SummaryRow]) -> String {
    let mut out = String::from("# median_auc and mad_auc (mean absolute deviation about the median) over `reps` replicates\n");
    out.push_str(ExperimentConfig::CSV_FIELDS);
    out.push_str(",median_auc,mad_auc\n");
    for row in rows {
        out.push_str(&format!("{},{},{}\n", row.config.csv_fields(), row.median_auc, row.mad_auc));
    }
    out
}

/// Long-format dump of every replicate AUC.
pub fn replicate_table(rows: &[SummaryRow]) -> String {
    let mut out = String::from(ExperimentConfig::CSV_FIELDS);
    out.push_str(",replicate,auc\n");
    for row in rows {
        for (k, a) in row.per_rep_aucs.iter().enumerate() {
            out.push_str(&format!("{},{k},{a}\n", row.config.csv_fields()));
        }
    }
    out
}

/// Builds the configurations described by a TOML table.
///
/// Every key may hold a scalar or an array; arrays are swept as a cartesian
/// product with the first listed key varying slowest.
pub fn configs_from_toml(text: &str, path: &str) -> Result<Vec<ExperimentConfig>> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let (line, column) = e
            .span()
            .map(|s| line_col(text, s.start))
            .unwrap_or((1, 1));
        Error::Parse { path: path.into(), line, column, message: e.message().to_string() }
    })?;
    const KEYS: [&str; 11] =
        ["kernel", "regime", "n", "grid", "partition", "noise", "bins", "per_curve", "reps", "seed", "folds"];
    for key in table.keys() {
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
    }
    for key in ["kernel", "regime", "n", "partition", "seed"] {
        if !table.contains_key(key) {
            return Err(Error::Config(format!("missing key `{key}`")));
        }
    }
    let axes: Vec<(&str, Vec<toml::Value>)> = KEYS
        .iter()
        .filter_map(|&k| {
            table.get(k).map(|v| match v {
                toml::Value::Array(a) => (k, a.clone()),
                other => (k, vec![other.clone()]),
            })
        })
        .collect();
    if let Some((k, _)) = axes.iter().find(|(_, v)| v.is_empty()) {
        return Err(Error::Config(format!("key `{k}` has an empty list")));
    }

    let mut configs = Vec::new();
    let mut pos = vec![0usize; axes.len()];
    loop {
        let mut cfg = ExperimentConfig::new(KernelKind::Gaussian, Regime::Complete, 0, 0);
        for (a, (key, values)) in axes.iter().enumerate() {
            apply_key(&mut cfg, key, &values[pos[a]])?;
        }
        cfg.validate()?;
        configs.push(cfg);
        let mut a = axes.len();
        loop {
            if a == 0 {
                return Ok(configs);
            }
            a -= 1;
            pos[a] += 1;
            if pos[a] < axes[a].1.len() {
                break;
            }
            pos[a] = 0;
        }
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn apply_key(cfg: &mut ExperimentConfig, key: &str, value: &toml::Value) -> Result<()> {
    let bad = |what: &str| Error::Config(format!("key `{key}`: expected {what}, got {value}"));
    let count = || -> Result<usize> {
        value.as_integer().filter(|&v| v >= 0).map(|v| v as usize).ok_or_else(|| bad("a nonnegative integer"))
    };
    match key {
        "kernel" => {
            let s = value.as_str().ok_or_else(|| bad("a string"))?;
            cfg.kernel = s.parse().map_err(|e: Error| Error::Config(format!("key `kernel`: {e}")))?;
        }
        "regime" => {
            let s = value.as_str().ok_or_else(|| bad("a string"))?;
            cfg.regime = s.parse().map_err(|e: Error| Error::Config(format!("key `regime`: {e}")))?;
        }
        "n" => cfg.n = count()?,
        "grid" => cfg.grid = count()?,
        "partition" => cfg.partition = count()?,
        "noise" => {
            cfg.noise = match value {
                toml::Value::Float(f) => *f,
                toml::Value::Integer(i) => *i as f64,
                _ => return Err(bad("a number")),
            }
        }
        "bins" => cfg.bins = count()?,
        "per_curve" => cfg.per_curve = count()?,
        "reps" => cfg.reps = count()?,
        "seed" => cfg.seed = count()? as u64,
        "folds" => cfg.folds = count()?,
        _ => unreachable!("keys are checked before parsing"),
    }
    Ok(())
}

/// One draw of the observations a replicate of `cfg` would see.
pub fn sample_regime(cfg: &ExperimentConfig, seed: u64) -> Result<ObservationSet> {
    cfg.validate()?;
    let model = Model::build(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(observe(cfg, &model, &mut rng))
}

/// Gram matrix of `kind` on a `grid`-point grid averaged over `bins × bins` blocks.
pub fn bin_average(kind: &KernelKind, bins: usize, grid: usize) -> Result<DMatrix<f64>> {
    let k = gram(kind, Grid::new(grid)?)?;
    let per = grid / bins;
    let v = k.values();
    Ok(DMatrix::from_fn(bins, bins, |a, b| {
        let mut s = 0.0;
        for i in a * per..(a + 1) * per {
            for j in b * per..(b + 1) * per {
                s += v[(i, j)];
            }
        }
        s / (per * per) as f64
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summarize_examples() {
        assert_eq!(summarize(&[1.0, 1.0, 1.0]).unwrap(), (1.0, 0.0));
        let (m, mad) = summarize(&[0.8, 0.9, 1.0]).unwrap();
        assert!((m - 0.9).abs() < 1e-15);
        assert!((mad - 0.2 / 3.0).abs() < 1e-12);
        assert_eq!(summarize(&[0.0, 1.0]).unwrap(), (0.5, 0.5));
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn seeds_differ_by_replicate() {
        let s: Vec<u64> = (0..100).map(|k| replicate_seed(7, k)).collect();
        let mut d = s.clone();
        d.sort();
        d.dedup();
        assert_eq!(d.len(), 100);
        assert_eq!(replicate_seed(7, 3), s[3]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::new(KernelKind::kms(), Regime::Complete, 50, 20);
        assert!(cfg.validate().is_ok());
        cfg.partition = 7;
        assert!(cfg.validate().is_err());
        cfg.partition = 20;
        cfg.reps = 0;
        assert!(cfg.validate().is_err());
        cfg.reps = 1;
        cfg.regime = Regime::Sparse;
        cfg.bins = 7;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_sweep_in_order() {
        let text = "kernel = \"kms\"\nregime = \"complete\"\nn = [50, 100]\npartition = 20\nreps = 3\nseed = 1\n";
        let cfgs = configs_from_toml(text, "sweep.toml").unwrap();
        assert_eq!(cfgs.len(), 2);
        assert_eq!((cfgs[0].n, cfgs[1].n), (50, 100));
        assert_eq!(cfgs[0].reps, 3);

        let text = "kernel = [\"k1\", \"k2\"]\nregime = \"complete\"\nn = [50, 100]\npartition = 20\nseed = 4\n";
        let cfgs = configs_from_toml(text, "sweep.toml").unwrap();
        let order: Vec<(String, usize)> = cfgs.iter().map(|c| (c.kernel.to_string(), c.n)).collect();
        assert_eq!(
            order,
            vec![
                ("gaussian".into(), 50),
                ("gaussian".into(), 100),
                ("brownian".into(), 50),
                ("brownian".into(), 100)
            ]
        );
    }

    #[test]
    fn toml_errors_name_the_key() {
        let err = configs_from_toml("regime = \"complete\"\nn = 50\npartition = 20\nseed = 1\n", "c.toml").unwrap_err();
        assert!(err.to_string().contains("`kernel`"));
        let err = configs_from_toml("kernel = \"kms\"\nregime = \"complete\"\nn = 50\npartition = 20\n", "c.toml").unwrap_err();
        assert!(err.to_string().contains("`seed`"));
        let err = configs_from_toml("kernel = \"kms\"\nregime = \"complete\"\nn = 50\npartition = 20\nseed = 1\nfoo = 1\n", "c.toml")
            .unwrap_err();
        assert!(err.to_string().contains("`foo`"));
        let err = configs_from_toml("kernel = \"kms\"\nregime = 3\nn = 50\npartition = 20\nseed = 1\n", "c.toml").unwrap_err();
        assert!(err.to_string().contains("`regime`"));
        let err = configs_from_toml("kernel = \"kms\nn = 5", "c.toml").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn replicates_are_deterministic() {
        let mut cfg = ExperimentConfig::new(KernelKind::Brownian, Regime::Complete, 20, 5);
        cfg.grid = 50;
        cfg.reps = 3;
        let a = run_config(&cfg).unwrap();
        let b = run_config(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.per_rep_aucs.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(a.median_auc >= a.per_rep_aucs.iter().cloned().fold(f64::INFINITY, f64::min));
        cfg.seed = 2;
        assert_ne!(run_config(&cfg).unwrap().per_rep_aucs, a.per_rep_aucs);
    }

    #[test]
    fn sparse_observations_respect_counts() {
        let mut cfg = ExperimentConfig::new(KernelKind::kms(), Regime::Sparse, 10, 10);
        cfg.grid = 100;
        cfg.bins = 20;
        match sample_regime(&cfg, 3).unwrap() {
            ObservationSet::Sparse { curves, bins, grid } => {
                assert_eq!((bins, grid), (20, 100));
                for c in &curves {
                    assert_eq!(c.len(), 5);
                    let mut ts: Vec<f64> = c.iter().map(|o| o.0).collect();
                    ts.sort_by(f64::total_cmp);
                    ts.dedup();
                    assert_eq!(ts.len(), 5);
                }
            }
            other => panic!("unexpected regime {other:?}"),
        }
    }

    #[test]
    fn regular_observations_include_endpoints() {
        let mut cfg = ExperimentConfig::new(KernelKind::Brownian, Regime::Regular, 10, 10);
        cfg.grid = 100;
        match sample_regime(&cfg, 3).unwrap() {
            ObservationSet::Regular { obs } => {
                assert_eq!(obs.ncols(), 101);
                // Brownian motion starts at zero.
                assert!(obs.column(0).iter().all(|x| x.abs() < 1e-6));
            }
            other => panic!("unexpected regime {other:?}"),
        }
    }

    #[test]
    fn population_brownian_band_small() {
        let pg = population_recovery(&KernelKind::Brownian, 200, 20, None, None).unwrap();
        assert_eq!(pg.graph, PixelGraph::from_fn(20, |i, j| i.abs_diff(j) <= 1));
    }

    #[test]
    fn population_accepts_explicit_tuning() {
        let pg = population_recovery(&KernelKind::Brownian, 100, 10, Some(1e-6), Some(1e300)).unwrap();
        assert_eq!(pg.graph, PixelGraph::diagonal(10));
        assert_eq!(pg.kappa, 1e-6);
        assert!(population_recovery(&KernelKind::Brownian, 100, 7, None, None).is_err());
    }
}
