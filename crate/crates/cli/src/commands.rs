use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use convex_bicluster::admm::{max_row_sum_deviation, AdmmConfig, AdmmEngine, FitResult, Initialization};
use convex_bicluster::cluster::{adjusted_rand_index, extract_labels, BiclusterLabels, DEFAULT_FUSION_EPS};
use convex_bicluster::data::DataMatrix;
use convex_bicluster::prox::NormKind;
use convex_bicluster::simgen::{gen_checkerboard, gen_compositional, CheckerboardSpec, CompositionalSpec};
use convex_bicluster::tuning::{
    GraphSpec, TuningGrid, TuningProblem, TuningRegistry, DEFAULT_GRID_POINTS, DEFAULT_HOLDOUT_FRAC,
    DEFAULT_STABILITY_REPETITIONS,
};
use ndarray::Array2;

use crate::error::{exit, CliError};
use crate::io::{self, CsvMatrix, ManifestEntry, RunManifest, Summary};

#[derive(Debug, Parser)]
#[command(name = "bicluster", version, about = "Convex biclustering of numeric matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one (gamma1, gamma2) pair and write the fitted matrix and labels.
    Fit(FitArgs),
    /// Fit every point of a grid and write one snapshot per point.
    Path(PathArgs),
    /// Generate synthetic data with known biclusters.
    Simulate(SimulateArgs),
    /// Select tuning parameters on a grid.
    Tune(TuneArgs),
    /// Adjusted Rand index between two label files.
    Ari(AriArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Fusion penalty norm.
    #[arg(long, default_value = "l2", value_parser = parse_norm)]
    pub norm: NormKind,
    /// Row augmentation constant [default: 8, or 1 with --compositional].
    #[arg(long)]
    pub nu1: Option<f64>,
    /// Column augmentation constant [default: 8, or 1 with --compositional].
    #[arg(long)]
    pub nu2: Option<f64>,
    /// Row-sum augmentation constant [default: 8, or 1 with --compositional].
    #[arg(long)]
    pub nu3: Option<f64>,
    /// Row neighbour count for the kNN weights.
    #[arg(long, default_value_t = 5)]
    pub knn_m1: usize,
    /// Column neighbour count for the kNN weights.
    #[arg(long, default_value_t = 5)]
    pub knn_m2: usize,
    /// Gaussian kernel scale.
    #[arg(long, default_value_t = 1.0)]
    pub phi: f64,
    /// Use all pairs with unit weights instead of kNN weights.
    #[arg(long)]
    pub full_graph: bool,
    /// Constrain every fitted row to sum to one.
    #[arg(long)]
    pub compositional: bool,
    /// Centre at the grand mean and scale to unit Frobenius norm before fitting;
    /// outputs are mapped back to the input scale.
    #[arg(long)]
    pub standardize: bool,
    /// Primal and dual residual tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    /// Relative fusion tolerance for label extraction.
    #[arg(long, default_value_t = DEFAULT_FUSION_EPS)]
    pub eps: f64,
}

fn parse_norm(s: &str) -> Result<NormKind, String> {
    s.parse().map_err(|e: convex_bicluster::Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Explicit gamma1 values (comma separated), paired with --grid-gamma2.
    #[arg(long, value_delimiter = ',', requires = "grid_gamma2", conflicts_with = "grid_gamma")]
    pub grid_gamma1: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', requires = "grid_gamma1")]
    pub grid_gamma2: Option<Vec<f64>>,
    /// Explicit single-gamma values (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub grid_gamma: Option<Vec<f64>>,
    /// Lower end of the default log-spaced grid.
    #[arg(long, default_value_t = 0.1)]
    pub grid_min: f64,
    /// Upper end of the default log-spaced grid.
    #[arg(long, default_value_t = 100.0)]
    pub grid_max: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
    /// Use the default log grid as a (gamma1, gamma2) product instead of a
    /// single-gamma sequence.
    #[arg(long)]
    pub grid_pair: bool,
}

impl GridArgs {
    pub fn grid(&self) -> Result<TuningGrid, CliError> {
        let grid = match (&self.grid_gamma1, &self.grid_gamma2, &self.grid_gamma) {
            (Some(g1), Some(g2), _) => TuningGrid::pair(g1.clone(), g2.clone()),
            (_, _, Some(g)) => TuningGrid::single(g.clone()),
            _ => {
                let v = TuningGrid::log_spaced(self.grid_min, self.grid_max, self.grid_points)?;
                if self.grid_pair {
                    TuningGrid::pair(v.clone(), v)
                } else {
                    TuningGrid::single(v)
                }
            }
        };
        Ok(grid?)
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, conflicts_with = "gamma")]
    pub gamma1: Option<f64>,
    #[arg(long, conflicts_with = "gamma")]
    pub gamma2: Option<f64>,
    /// Single tuning parameter; row and column weights are rescaled to a
    /// common scale.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Start from a random iterate drawn with this seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(subcommand)]
    pub design: Design,
}

#[derive(Debug, Subcommand)]
pub enum Design {
    /// Gaussian checkerboard.
    Checkerboard {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 40)]
        p: usize,
        #[arg(long, default_value_t = 4)]
        row_clusters: usize,
        #[arg(long, default_value_t = 4)]
        col_clusters: usize,
        #[arg(long, default_value_t = 2.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Dirichlet-multinomial relative abundances with a treated arm.
    Compositional {
        #[arg(long, default_value_t = 50)]
        per_arm: usize,
        #[arg(long, default_value_t = 10_000)]
        reads: u64,
        #[arg(long, default_value_t = 0.01)]
        dispersion: f64,
        #[arg(long, default_value_t = 1400.0)]
        fold: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Holdout,
    Stability,
    Ari,
}

impl Method {
    fn registry_name(self) -> &'static str {
        match self {
            Method::Holdout => "holdout",
            Method::Stability => "stability",
            Method::Ari => "ari_oracle",
        }
    }
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, value_enum, default_value = "holdout")]
    pub method: Method,
    #[arg(long, default_value_t = DEFAULT_HOLDOUT_FRAC)]
    pub holdout_frac: f64,
    #[arg(long, default_value_t = DEFAULT_STABILITY_REPETITIONS)]
    pub repetitions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Known row labels of the input (ARI method).
    #[arg(long, required_if_eq("method", "ari"))]
    pub truth_rows: Option<PathBuf>,
    /// Known column labels of the input (ARI method).
    #[arg(long, required_if_eq("method", "ari"))]
    pub truth_cols: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct AriArgs {
    pub labels_a: PathBuf,
    pub labels_b: PathBuf,
}

pub fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Path(a) => cmd_path(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Tune(a) => cmd_tune(&a),
        Command::Ari(a) => cmd_ari(&a),
    }
}

impl ModelArgs {
    fn config(&self) -> AdmmConfig {
        let mut cfg = if self.compositional {
            AdmmConfig::compositional()
        } else {
            AdmmConfig::general()
        };
        cfg.norm = self.norm;
        cfg.nu1 = self.nu1.unwrap_or(cfg.nu1);
        cfg.nu2 = self.nu2.unwrap_or(cfg.nu2);
        cfg.nu3 = self.nu3.unwrap_or(cfg.nu3);
        cfg.tol_primal = self.tol;
        cfg.tol_dual = self.tol;
        cfg.max_iters = self.max_iters;
        cfg
    }

    fn graph(&self, single_gamma: bool) -> GraphSpec {
        let g = if self.full_graph {
            GraphSpec::full()
        } else {
            GraphSpec::knn(self.knn_m1, self.knn_m2, self.phi)
        };
        g.with_single_gamma(single_gamma)
    }

    fn echo(&self, s: &mut Summary, cfg: &AdmmConfig) {
        s.push("norm", cfg.norm)
            .push("nu1", cfg.nu1)
            .push("nu2", cfg.nu2)
            .push("nu3", cfg.nu3)
            .push("full_graph", self.full_graph)
            .push("knn_m1", self.knn_m1)
            .push("knn_m2", self.knn_m2)
            .push("phi", self.phi)
            .push("compositional", self.compositional)
            .push("standardize", self.standardize)
            .push("tol", self.tol)
            .push("max_iters", self.max_iters)
            .push("eps", self.eps);
    }
}

/// Input data as fitted, plus the map back to the input scale.
struct Prepared {
    csv: CsvMatrix,
    data: DataMatrix,
    shift: f64,
    scale: f64,
}

impl Prepared {
    fn load(path: &Path, model: &ModelArgs) -> Result<Self, CliError> {
        let csv = io::read_matrix(path)?;
        let raw = DataMatrix::for_biclustering(csv.values.clone())?;
        if model.standardize && model.compositional {
            return Err(CliError::Config(
                "--standardize cannot be combined with --compositional".into(),
            ));
        }
        let (shift, scale) = if model.standardize { raw.standardization() } else { (0.0, 1.0) };
        let data = if model.standardize { raw.standardized() } else { raw };
        Ok(Self { csv, data, shift, scale })
    }

    fn to_input_scale(&self, a: &Array2<f64>) -> Array2<f64> {
        if self.scale == 1.0 && self.shift == 0.0 {
            a.clone()
        } else {
            a.mapv(|v| v * self.scale + self.shift)
        }
    }

    fn write_snapshot(&self, dir: &Path, fit: &FitResult, labels: &BiclusterLabels) -> Result<(), CliError> {
        io::write_matrix(
            &dir.join("A_hat.csv"),
            &self.to_input_scale(fit.a_hat()),
            self.csv.col_names.as_deref(),
            self.csv.row_names.as_deref(),
        )?;
        io::write_labels(&dir.join("row_labels.csv"), &labels.row_labels)?;
        io::write_labels(&dir.join("col_labels.csv"), &labels.col_labels)
    }
}

fn fit_summary(s: &mut Summary, fit: &FitResult, labels: &BiclusterLabels, compositional: bool) {
    s.push("gamma1", fit.gamma1)
        .push("gamma2", fit.gamma2)
        .push("iterations", fit.iterations)
        .push("converged", fit.converged)
        .push("primal_residual", fit.primal_residual)
        .push("dual_residual", fit.dual_residual)
        .push("objective", fit.objective)
        .push("n_row_clusters", labels.n_row_clusters)
        .push("n_col_clusters", labels.n_col_clusters);
    if compositional {
        s.push("max_row_sum_deviation", max_row_sum_deviation(fit.a_hat()));
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<i32, CliError> {
    let prepared = Prepared::load(&args.input, &args.model)?;
    let cfg = args.model.config();
    let single = args.gamma.is_some();
    let (g1, g2) = match args.gamma {
        Some(g) => (g, g),
        None => (args.gamma1.unwrap_or(0.0), args.gamma2.unwrap_or(0.0)),
    };
    let graph = args.model.graph(single);
    let (rows, cols) = graph.build(&prepared.data)?;
    let engine = AdmmEngine::new(&prepared.data, &rows, &cols, &cfg)?;
    let init = match args.seed {
        Some(seed) => Initialization::Random { seed },
        None => Initialization::Differences,
    };
    let fit = engine.fit_at(g1, g2, init)?;
    let labels = extract_labels(&fit, &rows, &cols, args.model.eps)?;
    prepared.write_snapshot(&args.out_dir, &fit, &labels)?;

    let mut s = Summary::new();
    s.push("subcommand", "fit")
        .push("input", args.input.display())
        .push("n", prepared.data.nrows())
        .push("p", prepared.data.ncols())
        .push("single_gamma", single);
    args.model.echo(&mut s, &cfg);
    s.push("seed", args.seed.map_or("none".to_string(), |v| v.to_string()));
    fit_summary(&mut s, &fit, &labels, cfg.compositional);
    s.write(&args.out_dir.join("summary.txt"))?;
    Ok(if fit.converged { exit::SUCCESS } else { exit::NOT_CONVERGED })
}

pub fn cmd_path(args: &PathArgs) -> Result<i32, CliError> {
    let prepared = Prepared::load(&args.input, &args.model)?;
    let cfg = args.model.config();
    let grid = args.grid.grid()?;
    let graph = args.model.graph(grid.is_single());
    let (rows, cols) = graph.build(&prepared.data)?;
    let engine = AdmmEngine::new(&prepared.data, &rows, &cols, &cfg)?;
    let points = grid.points();
    let fits = convex_bicluster::tuning::fit_grid(&engine, &points)?;

    let mut manifest = RunManifest::new("path", cfg.clone());
    manifest.inputs.push(args.input.display().to_string());
    manifest.graph = Some(graph);
    manifest.grid = Some(grid);
    let mut all_converged = true;
    for (k, fit) in fits.iter().enumerate() {
        let labels = extract_labels(fit, &rows, &cols, args.model.eps)?;
        let name = format!("point_{k:03}");
        prepared.write_snapshot(&args.out_dir.join(&name), fit, &labels)?;
        all_converged &= fit.converged;
        manifest.outputs.push(name.clone());
        manifest.entries.push(ManifestEntry {
            gamma1: fit.gamma1,
            gamma2: fit.gamma2,
            directory: name,
            iterations: fit.iterations,
            converged: fit.converged,
            objective: fit.objective,
            n_row_clusters: labels.n_row_clusters,
            n_col_clusters: labels.n_col_clusters,
        });
    }
    io::write_text(&args.out_dir.join("manifest.json"), &manifest.to_json())?;

    let mut s = Summary::new();
    s.push("subcommand", "path")
        .push("input", args.input.display())
        .push("n", prepared.data.nrows())
        .push("p", prepared.data.ncols())
        .push("grid_points", points.len())
        .push("single_gamma", manifest.grid.as_ref().is_some_and(|g| g.is_single()));
    args.model.echo(&mut s, &cfg);
    s.push("all_converged", all_converged);
    s.write(&args.out_dir.join("summary.txt"))?;
    Ok(if all_converged { exit::SUCCESS } else { exit::NOT_CONVERGED })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32, CliError> {
    let mut s = Summary::new();
    s.push("subcommand", "simulate");
    let (x, truth, out_dir) = match &args.design {
        Design::Checkerboard {
            n,
            p,
            row_clusters,
            col_clusters,
            sigma,
            seed,
            out_dir,
        } => {
            let spec = CheckerboardSpec::new(*n, *p, *row_clusters, *col_clusters, *sigma, *seed);
            spec.validate()?;
            s.push("design", "checkerboard")
                .push("n", n)
                .push("p", p)
                .push("row_clusters", row_clusters)
                .push("col_clusters", col_clusters)
                .push("sigma", sigma)
                .push("seed", seed);
            let (x, t) = gen_checkerboard(&spec)?;
            (x, t, out_dir)
        }
        Design::Compositional {
            per_arm,
            reads,
            dispersion,
            fold,
            seed,
            out_dir,
        } => {
            let mut spec = CompositionalSpec::default_design(*seed);
            spec.n_control = *per_arm;
            spec.n_treatment = *per_arm;
            spec.reads_per_sample = *reads;
            spec.dispersion = *dispersion;
            spec.ratio_fold_reduction = *fold;
            spec.validate()?;
            s.push("design", "compositional")
                .push("per_arm", per_arm)
                .push("p", spec.proportion_means.len())
                .push("reads", reads)
                .push("dispersion", dispersion)
                .push("fold", fold)
                .push("seed", seed);
            let (x, t) = gen_compositional(&spec)?;
            (x, t, out_dir)
        }
    };
    io::write_matrix(&out_dir.join("data.csv"), x.values(), None, None)?;
    io::write_labels(&out_dir.join("truth_rows.csv"), &truth.row_labels)?;
    io::write_labels(&out_dir.join("truth_cols.csv"), &truth.col_labels)?;
    s.write(&out_dir.join("summary.txt"))?;
    Ok(exit::SUCCESS)
}

pub fn cmd_tune(args: &TuneArgs) -> Result<i32, CliError> {
    let prepared = Prepared::load(&args.input, &args.model)?;
    let cfg = args.model.config();
    cfg.validate()?;
    let grid = args.grid.grid()?;
    let graph = args.model.graph(grid.is_single());
    let truth = match (&args.truth_rows, &args.truth_cols) {
        (Some(r), Some(c)) => Some(BiclusterLabels::new(&io::read_labels(r)?, &io::read_labels(c)?)),
        _ => None,
    };
    let mut problem = TuningProblem::new(&prepared.data, &graph, &cfg, &grid);
    problem.seed = args.seed;
    problem.holdout_frac = args.holdout_frac;
    problem.repetitions = args.repetitions;
    problem.fusion_eps = args.model.eps;
    problem.truth = truth.as_ref();
    let method = TuningRegistry::builtin().get(args.method.registry_name())?;
    let report = method.tune(&problem)?;

    let json = serde_json::to_string_pretty(&report).expect("report serialises") + "\n";
    io::write_text(&args.out_dir.join("report.json"), &json)?;
    let mut s = Summary::new();
    s.push("subcommand", "tune")
        .push("input", args.input.display())
        .push("method", &report.method)
        .push("grid_points", grid.len())
        .push("single_gamma", grid.is_single())
        .push("seed", args.seed)
        .push("holdout_frac", args.holdout_frac)
        .push("repetitions", args.repetitions);
    args.model.echo(&mut s, &cfg);
    s.push("selected_gamma1", report.selected_gamma1)
        .push("selected_gamma2", report.selected_gamma2)
        .push("selected_score", report.selected_score);
    s.write(&args.out_dir.join("summary.txt"))?;
    Ok(exit::SUCCESS)
}

pub fn cmd_ari(args: &AriArgs) -> Result<i32, CliError> {
    let a = io::read_labels(&args.labels_a)?;
    let b = io::read_labels(&args.labels_b)?;
    println!("{}", adjusted_rand_index(&a, &b)?);
    Ok(exit::SUCCESS)
}
