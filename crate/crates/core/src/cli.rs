//! Command line front end.
//!
//! Every file written here starts with a `#` comment echoing the invocation.

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::estimators::ObservationSet;
use crate::harness::{configs_from_toml, replicate_table, run_config, summary_table};
use crate::io::{comment_block, format_matrix, parse_dense, parse_matrix, parse_sparse, read_to_string, write_string};
use crate::kernels::KernelKind;
use crate::operator::{diag_blocks, precision_block_norms, BlockNormMatrix};
use crate::partition::{make_partition, pixelate_truth, PixelGraph, TruthSpec};
use crate::recovery::{auc, roc, threshold_graph, tpr_fpr};
use crate::tuning::{lambda_grid, ridge_cv, threshold_candidates, RidgeRegime};

#[derive(Debug, Parser)]
#[command(name = "gpgraph", version, about = "Graph recovery for Gaussian processes observed as curves")]
pub struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Monte Carlo experiments described by a TOML config.
    Simulate(SimulateArgs),
    /// Estimate precision block norms from curve data.
    Estimate(EstimateArgs),
    /// Propose thresholds from a norm matrix.
    Tune(TuneArgs),
    /// Threshold a norm matrix into a graph.
    Recover(RecoverArgs),
    /// Pixelate a reference graph.
    Truth(TruthArgs),
    /// Score a graph or a norm matrix against a reference graph.
    Eval(EvalArgs),
    /// Cumulative log-returns `log(P_t / P_0)` of a price matrix.
    Logreturns(LogreturnsArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Optional long-format table of every replicate AUC.
    #[arg(long)]
    pub replicates: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataRegime {
    Complete,
    Regular,
    Sparse,
    Pairwise,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "complete")]
    pub regime: DataRegime,
    #[arg(long)]
    pub partition: usize,
    /// Output grid size for sparse data.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Bin count for sparse data.
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long, conflicts_with = "cv", required_unless_present = "cv")]
    pub ridge: Option<f64>,
    #[arg(long)]
    pub cv: bool,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Subtract the sample mean before estimating.
    #[arg(long)]
    pub center: bool,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub norms: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    #[arg(long)]
    pub norms: PathBuf,
    #[arg(long)]
    pub threshold: f64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("spec").required(true).args(["kernel", "band", "distances", "lattice"])))]
pub struct TruthArgs {
    #[arg(long)]
    pub kernel: Option<KernelKind>,
    /// `{|u - v| <= w}`.
    #[arg(long)]
    pub band: Option<f64>,
    /// Comma-separated distances `d` for `{|u - v| in {0, d...}}`.
    #[arg(long, value_delimiter = ',')]
    pub distances: Option<Vec<f64>>,
    /// Lattice size `q` for `{|floor(qu) - floor(qv)| <= radius}`.
    #[arg(long)]
    pub lattice: Option<u32>,
    #[arg(long, default_value_t = 1)]
    pub radius: u32,
    #[arg(long)]
    pub partition: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("input").required(true).args(["estimate", "norms"])))]
pub struct EvalArgs {
    /// Estimated graph; writes TPR and FPR.
    #[arg(long)]
    pub estimate: Option<PathBuf>,
    /// Norm matrix; writes the ROC curve and its AUC.
    #[arg(long)]
    pub norms: Option<PathBuf>,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct LogreturnsArgs {
    #[arg(long)]
    pub prices: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let invocation = args.iter().map(|a| a.to_string_lossy().into_owned()).collect::<Vec<_>>().join(" ");
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(Error::Config(e.render().to_string().trim_end().to_string())),
    };
    let job = || execute(cli.command, &invocation);
    match cli.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {t} threads: {e}")))?
            .install(job),
        None => job(),
    }
}

fn execute(command: Command, invocation: &str) -> Result<()> {
    let header = comment_block(invocation);
    match command {
        Command::Simulate(a) => simulate(a, header),
        Command::Estimate(a) => estimate(a, header),
        Command::Tune(a) => tune(a, header),
        Command::Recover(a) => recover(a, header),
        Command::Truth(a) => truth(a, header),
        Command::Eval(a) => eval(a, header),
        Command::Logreturns(a) => logreturns(a, header),
    }
}

fn path_str(p: &std::path::Path) -> String {
    p.display().to_string()
}

fn simulate(a: SimulateArgs, header: String) -> Result<()> {
    let text = read_to_string(&a.config)?;
    let configs = configs_from_toml(&text, &path_str(&a.config))?;
    let rows = configs.iter().map(run_config).collect::<Result<Vec<_>>>()?;
    write_string(&a.output, &(header.clone() + &summary_table(&rows)))?;
    if let Some(path) = a.replicates {
        write_string(&path, &(header + &replicate_table(&rows)))?;
    }
    Ok(())
}

fn read_norms(path: &std::path::Path) -> Result<BlockNormMatrix> {
    let m = parse_matrix(&read_to_string(path)?, &path_str(path))?;
    BlockNormMatrix::new(m).map_err(|e| Error::Config(format!("{}: {e}", path_str(path))))
}

fn read_graph(path: &std::path::Path) -> Result<PixelGraph> {
    PixelGraph::parse_text(&read_to_string(path)?, &path_str(path))
}

fn estimate(a: EstimateArgs, header: String) -> Result<()> {
    let text = read_to_string(&a.data)?;
    let name = path_str(&a.data);
    let obs = match a.regime {
        DataRegime::Complete => ObservationSet::Complete { samples: parse_matrix(&text, &name)? },
        DataRegime::Regular => ObservationSet::Regular { obs: parse_matrix(&text, &name)? },
        DataRegime::Pairwise => ObservationSet::PairwiseMissing { samples: parse_dense(&text, &name)? },
        DataRegime::Sparse => {
            let grid = a.grid.ok_or_else(|| Error::Config("sparse data needs --grid".into()))?;
            let bins = a.bins.ok_or_else(|| Error::Config("sparse data needs --bins".into()))?;
            ObservationSet::Sparse { curves: parse_sparse(&text, &name)?, bins, grid }
        }
    };
    let est = obs.estimate(a.center)?;
    if est.skipped_curves > 0 {
        eprintln!("warning: skipped {} curve(s) with fewer than two observations", est.skipped_curves);
    }
    let partition = make_partition(est.gram.dim(), a.partition)?;
    let kappa = if a.cv {
        let regime = match a.regime {
            DataRegime::Complete | DataRegime::Pairwise => RidgeRegime::Complete,
            DataRegime::Regular | DataRegime::Sparse => RidgeRegime::Discrete,
        };
        let grid = lambda_grid(&diag_blocks(&est.gram, &partition)?, regime)?;
        ridge_cv(&obs, &partition, a.folds, &grid, a.center)?.kappa
    } else {
        a.ridge.expect("clap requires --ridge without --cv")
    };
    let norms = precision_block_norms(&est.gram, &partition, kappa)?;
    println!("kappa = {kappa}");
    let meta = format!("kappa = {kappa}\nskipped_curves = {}", est.skipped_curves);
    write_string(&a.output, &(header + &comment_block(&meta) + &format_matrix(norms.matrix())))
}

fn tune(a: TuneArgs, header: String) -> Result<()> {
    let norms = read_norms(&a.norms)?;
    let c = threshold_candidates(&norms);
    let mut out = header;
    out.push_str(&comment_block(&format!("bandwidth = {}\nzero_norms = {}", c.bandwidth, c.zero_count)));
    out.push_str("kind,x,y\n");
    for (rho, d) in c.minima.iter().zip(&c.minima_density) {
        out.push_str(&format!("minimum,{rho},{d}\n"));
    }
    for rho in &c.elbows {
        out.push_str(&format!("elbow,{rho},NA\n"));
    }
    for (x, f) in &c.density_curve {
        out.push_str(&format!("density,{x},{f}\n"));
    }
    write_string(&a.output, &out)
}

fn recover(a: RecoverArgs, header: String) -> Result<()> {
    if !(a.threshold > 0.0) || !a.threshold.is_finite() {
        return Err(Error::Config(format!("--threshold must be positive, got {}", a.threshold)));
    }
    let norms = read_norms(&a.norms)?;
    write_string(&a.output, &(header + &threshold_graph(&norms, a.threshold).to_text()))
}

fn truth(a: TruthArgs, header: String) -> Result<()> {
    let spec = if let Some(kind) = &a.kernel {
        TruthSpec::for_kernel(kind)
    } else if let Some(w) = a.band {
        TruthSpec::DiagBand { width: w }
    } else if let Some(d) = a.distances {
        TruthSpec::DistanceSet { distances: d }
    } else if let Some(q) = a.lattice {
        TruthSpec::LatticeBand { q, radius: a.radius }
    } else {
        unreachable!("clap requires one truth specification")
    };
    spec.validate()?;
    let partition = make_partition(a.partition, a.partition)?;
    write_string(&a.output, &(header + &pixelate_truth(&spec, &partition).to_text()))
}

fn eval(a: EvalArgs, header: String) -> Result<()> {
    let reference = read_graph(&a.truth)?;
    let mut out = header;
    if let Some(path) = a.estimate {
        let (tpr, fpr) = tpr_fpr(&read_graph(&path)?, &reference)?;
        out.push_str(&format!("tpr,fpr\n{tpr},{fpr}\n"));
        println!("TPR = {tpr}, FPR = {fpr}");
    } else if let Some(path) = a.norms {
        let curve = roc(&read_norms(&path)?, &reference)?;
        let area = auc(&curve);
        out.push_str(&comment_block(&format!("auc = {area}")));
        out.push_str("fpr,tpr,threshold\n");
        for (&(f, t), rho) in curve.points.iter().zip(&curve.thresholds) {
            let rho = rho.map_or("NA".to_string(), |r| format!("{r}"));
            out.push_str(&format!("{f},{t},{rho}\n"));
        }
        println!("AUC = {area}");
    }
    write_string(&a.output, &out)
}

/// `log(P_jt / P_j0)` row by row. Missing prices stay missing.
pub fn log_returns(prices: &nalgebra::DMatrix<f64>, path: &str) -> Result<nalgebra::DMatrix<f64>> {
    for i in 0..prices.nrows() {
        for j in 0..prices.ncols() {
            let v = prices[(i, j)];
            if v <= 0.0 {
                return Err(Error::Domain(format!(
                    "{path}: price at row {}, column {} is {v}; prices must be positive",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(nalgebra::DMatrix::from_fn(prices.nrows(), prices.ncols(), |i, j| {
        (prices[(i, j)] / prices[(i, 0)]).ln()
    }))
}

fn logreturns(a: LogreturnsArgs, header: String) -> Result<()> {
    let name = path_str(&a.prices);
    let prices = parse_dense(&read_to_string(&a.prices)?, &name)?;
    let x = log_returns(&prices, &name)?;
    write_string(&a.output, &(header + &format_matrix(&x)))
}
