//! Tuning-parameter selection over a `(gamma1, gamma2)` grid.
//!
//! Selection methods implement [`TuningMethod`] and are looked up by name in a
//! [`TuningRegistry`]. Every grid point is fitted from the same cold start, so
//! reports do not depend on evaluation order; random draws come from
//! per-task substreams of the seed.

use std::sync::OnceLock;

use ndarray::{Array2, Axis};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{AdmmConfig, AdmmEngine, FitResult, Initialization};
use crate::cluster::{adjusted_rand_index, extract_labels, BiclusterLabels, DEFAULT_FUSION_EPS};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::weights::{build_knn_weights, full_edge_set, rescale_single_gamma, GraphAxis, WeightedEdgeSet};

pub const DEFAULT_HOLDOUT_FRAC: f64 = 0.1;
pub const DEFAULT_STABILITY_REPETITIONS: usize = 50;
pub const DEFAULT_GRID_POINTS: usize = 20;
const MASK_REDRAWS: usize = 10;
const BOOTSTRAP_REDRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid {
    gamma1_values: Vec<f64>,
    gamma2_values: Vec<f64>,
    single: bool,
}

fn check_sequence(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidConfig(format!("{name} grid is empty")));
    }
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidConfig(format!("{name} grid values must be finite and >= 0")));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(format!("{name} grid must be strictly ascending")));
    }
    Ok(())
}

impl TuningGrid {
    /// Full Cartesian grid.
    pub fn pair(gamma1_values: Vec<f64>, gamma2_values: Vec<f64>) -> Result<Self> {
        check_sequence("gamma1", &gamma1_values)?;
        check_sequence("gamma2", &gamma2_values)?;
        Ok(Self {
            gamma1_values,
            gamma2_values,
            single: false,
        })
    }

    /// One shared sequence, evaluated at `gamma1 = gamma2 = gamma`.
    pub fn single(values: Vec<f64>) -> Result<Self> {
        check_sequence("gamma", &values)?;
        Ok(Self {
            gamma2_values: values.clone(),
            gamma1_values: values,
            single: true,
        })
    }

    /// `count` log-spaced values from `lo` to `hi` inclusive.
    pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) || count == 0 {
            return Err(Error::InvalidConfig(format!(
                "log grid needs 0 < lo < hi and count >= 1, got ({lo}, {hi}, {count})"
            )));
        }
        if count == 1 {
            return Ok(vec![lo]);
        }
        let (a, b) = (lo.ln(), hi.ln());
        let step = (b - a) / (count - 1) as f64;
        let mut v: Vec<f64> = (0..count).map(|i| (a + step * i as f64).exp()).collect();
        v[0] = lo;
        v[count - 1] = hi;
        Ok(v)
    }

    pub fn gamma1_values(&self) -> &[f64] {
        &self.gamma1_values
    }

    pub fn gamma2_values(&self) -> &[f64] {
        &self.gamma2_values
    }

    pub fn is_single(&self) -> bool {
        self.single
    }

    /// Grid points, `gamma1`-major for pair grids.
    pub fn points(&self) -> Vec<(f64, f64)> {
        if self.single {
            return self.gamma1_values.iter().map(|&g| (g, g)).collect();
        }
        self.gamma1_values
            .iter()
            .flat_map(|&g1| self.gamma2_values.iter().map(move |&g2| (g1, g2)))
            .collect()
    }

    pub fn len(&self) -> usize {
        if self.single {
            self.gamma1_values.len()
        } else {
            self.gamma1_values.len() * self.gamma2_values.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub gamma1: f64,
    pub gamma2: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub method: String,
    /// `true` when larger scores are better.
    pub maximize: bool,
    pub scores: Vec<GridScore>,
    pub selected_gamma1: f64,
    pub selected_gamma2: f64,
    pub selected_score: f64,
}

impl TuningReport {
    /// Picks the best score; ties go to the larger `gamma1 + gamma2`.
    pub fn select(method: &str, maximize: bool, scores: Vec<GridScore>) -> Result<Self> {
        if let Some(bad) = scores.iter().find(|s| !s.score.is_finite()) {
            return Err(Error::Degenerate(format!(
                "non-finite score at ({}, {})",
                bad.gamma1, bad.gamma2
            )));
        }
        let better = |a: &GridScore, b: &GridScore| {
            let (sa, sb) = if maximize { (a.score, b.score) } else { (-a.score, -b.score) };
            sa > sb || (sa == sb && a.gamma1 + a.gamma2 > b.gamma1 + b.gamma2)
        };
        let mut best = *scores
            .first()
            .ok_or_else(|| Error::InvalidConfig("no grid points scored".into()))?;
        for s in &scores[1..] {
            if better(s, &best) {
                best = *s;
            }
        }
        Ok(Self {
            method: method.to_string(),
            maximize,
            scores,
            selected_gamma1: best.gamma1,
            selected_gamma2: best.gamma2,
            selected_score: best.score,
        })
    }

    /// Picks the best score; among tied points (in grid order) the lower
    /// median is taken, keeping the selection away from both plateau edges.
    pub fn select_central(method: &str, maximize: bool, scores: Vec<GridScore>) -> Result<Self> {
        let mut report = Self::select(method, maximize, scores)?;
        let tied: Vec<GridScore> = report
            .scores
            .iter()
            .filter(|s| s.score == report.selected_score)
            .copied()
            .collect();
        let mid = tied[(tied.len() - 1) / 2];
        report.selected_gamma1 = mid.gamma1;
        report.selected_gamma2 = mid.gamma2;
        Ok(report)
    }

    pub fn selected(&self) -> (f64, f64) {
        (self.selected_gamma1, self.selected_gamma2)
    }
}

/// How the fusion graphs are built from a data matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GraphKind {
    /// All pairs, unit weights.
    Full,
    /// Gaussian-kernel weights on symmetrised kNN graphs.
    Knn { m_rows: usize, m_cols: usize, phi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub kind: GraphKind,
    /// Rescale weights for a single shared tuning parameter.
    pub single_gamma: bool,
}

impl GraphSpec {
    pub fn full() -> Self {
        Self {
            kind: GraphKind::Full,
            single_gamma: false,
        }
    }

    pub fn knn(m_rows: usize, m_cols: usize, phi: f64) -> Self {
        Self {
            kind: GraphKind::Knn { m_rows, m_cols, phi },
            single_gamma: false,
        }
    }

    pub fn with_single_gamma(mut self, single_gamma: bool) -> Self {
        self.single_gamma = single_gamma;
        self
    }

    /// Row and column edge sets for `x`. Neighbour counts larger than the
    /// axis allows are clamped to `dimension - 1`.
    pub fn build(&self, x: &DataMatrix) -> Result<(WeightedEdgeSet, WeightedEdgeSet)> {
        let (n, p) = (x.nrows(), x.ncols());
        let (rows, cols) = match self.kind {
            GraphKind::Full => (full_edge_set(n)?, full_edge_set(p)?),
            GraphKind::Knn { m_rows, m_cols, phi } => (
                build_knn_weights(x, GraphAxis::Row, m_rows.min(n.saturating_sub(1)), phi)?,
                build_knn_weights(x, GraphAxis::Column, m_cols.min(p.saturating_sub(1)), phi)?,
            ),
        };
        if self.single_gamma {
            rescale_single_gamma(&rows, &cols, n, p)
        } else {
            Ok((rows, cols))
        }
    }
}

/// Rescales the weights for the single-parameter objective and returns
/// `(gamma, gamma, rows', cols')`.
pub fn single_gamma_mode(
    rows: &WeightedEdgeSet,
    cols: &WeightedEdgeSet,
    n: usize,
    p: usize,
    gamma: f64,
) -> Result<(f64, f64, WeightedEdgeSet, WeightedEdgeSet)> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidConfig(format!("gamma = {gamma} must be finite and >= 0")));
    }
    let (r, c) = rescale_single_gamma(rows, cols, n, p)?;
    Ok((gamma, gamma, r, c))
}

/// Fits every point from the default cold start. Results are in input order.
pub fn fit_grid(engine: &AdmmEngine, points: &[(f64, f64)]) -> Result<Vec<FitResult>> {
    points
        .par_iter()
        .map(|&(g1, g2)| engine.fit_at(g1, g2, Initialization::Differences))
        .collect()
}

fn task_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Hold-out mask of `round(frac * n * p)` entries with no fully masked column.
fn draw_mask(n: usize, p: usize, frac: f64, seed: u64) -> Result<Vec<(usize, usize)>> {
    let total = n * p;
    let count = ((frac * total as f64).round() as usize).max(1);
    for attempt in 0..MASK_REDRAWS {
        let mut rng = task_rng(seed, attempt as u64);
        let mut cells: Vec<usize> = sample(&mut rng, total, count).into_vec();
        cells.sort_unstable();
        let mut per_col = vec![0usize; p];
        cells.iter().for_each(|&c| per_col[c % p] += 1);
        if per_col.iter().all(|&k| k < n) {
            return Ok(cells.into_iter().map(|c| (c / p, c % p)).collect());
        }
    }
    Err(Error::Degenerate(format!(
        "every hold-out mask in {MASK_REDRAWS} draws masked a whole column"
    )))
}

/// Hold-out validation with column-mean imputation; minimises hold-out MSE.
///
/// For compositional fits each imputed row is renormalised to sum to one.
pub fn holdout_validate(
    x: &DataMatrix,
    rows: &WeightedEdgeSet,
    cols: &WeightedEdgeSet,
    grid: &TuningGrid,
    config: &AdmmConfig,
    holdout_frac: f64,
    seed: u64,
) -> Result<TuningReport> {
    if !(holdout_frac > 0.0 && holdout_frac < 0.5) {
        return Err(Error::InvalidConfig(format!(
            "hold-out fraction {holdout_frac} must lie in (0, 0.5)"
        )));
    }
    let (n, p) = (x.nrows(), x.ncols());
    let mask = draw_mask(n, p, holdout_frac, seed)?;
    let mut masked = Array2::from_elem((n, p), false);
    mask.iter().for_each(|&(i, j)| masked[[i, j]] = true);

    let mut imputed = x.values().clone();
    for j in 0..p {
        let (sum, k) = (0..n)
            .filter(|&i| !masked[[i, j]])
            .fold((0.0, 0usize), |(s, k), i| (s + x.values()[[i, j]], k + 1));
        let mean = sum / k as f64;
        for i in 0..n {
            if masked[[i, j]] {
                imputed[[i, j]] = mean;
            }
        }
    }
    if config.compositional {
        for mut row in imputed.axis_iter_mut(Axis(0)) {
            let s = row.sum();
            if s > 0.0 {
                row /= s;
            }
        }
    }
    let engine = AdmmEngine::new(&DataMatrix::new(imputed)?, rows, cols, config)?;
    let points = grid.points();
    let fits = fit_grid(&engine, &points)?;
    let scores = points
        .iter()
        .zip(&fits)
        .map(|(&(gamma1, gamma2), fit)| {
            let a = fit.a_hat();
            let sse: f64 = mask
                .iter()
                .map(|&(i, j)| (a[[i, j]] - x.values()[[i, j]]).powi(2))
                .sum();
            GridScore {
                gamma1,
                gamma2,
                score: sse / mask.len() as f64,
            }
        })
        .collect();
    TuningReport::select("holdout", false, scores)
}

fn is_trivial(labels: &[usize], k: usize) -> bool {
    k <= 1 || k == labels.len()
}

/// Column-partition agreement of two fits; zero when either partition is trivial.
fn column_agreement(a: &BiclusterLabels, b: &BiclusterLabels) -> Result<f64> {
    if is_trivial(&a.col_labels, a.n_col_clusters) || is_trivial(&b.col_labels, b.n_col_clusters) {
        return Ok(0.0);
    }
    adjusted_rand_index(&a.col_labels, &b.col_labels)
}

fn bootstrap_rows(rng: &mut ChaCha8Rng, n: usize) -> Result<Vec<usize>> {
    for _ in 0..BOOTSTRAP_REDRAWS {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let first = idx[0];
        if idx.iter().any(|&i| i != first) {
            return Ok(idx);
        }
    }
    Err(Error::Degenerate("bootstrap kept drawing a single row".into()))
}

fn bootstrap_labels(
    x: &DataMatrix,
    idx: &[usize],
    graph: &GraphSpec,
    config: &AdmmConfig,
    points: &[(f64, f64)],
    eps: f64,
) -> Result<Vec<BiclusterLabels>> {
    let xb = DataMatrix::new(x.values().select(Axis(0), idx))?;
    let (rows, cols) = graph.build(&xb)?;
    let engine = AdmmEngine::new(&xb, &rows, &cols, config)?;
    fit_grid(&engine, points)?
        .iter()
        .map(|f| extract_labels(f, &rows, &cols, eps))
        .collect()
}

/// Stability selection: per repetition, two row bootstraps are fitted at each
/// grid point and scored by the ARI between their column partitions.
pub fn stability_select(
    x: &DataMatrix,
    graph: &GraphSpec,
    grid: &TuningGrid,
    config: &AdmmConfig,
    repetitions: usize,
    seed: u64,
    eps: f64,
) -> Result<TuningReport> {
    if repetitions < 2 {
        return Err(Error::InvalidConfig(format!(
            "stability selection needs >= 2 repetitions, got {repetitions}"
        )));
    }
    let points = grid.points();
    let per_rep: Vec<Vec<f64>> = (0..repetitions)
        .into_par_iter()
        .map(|r| {
            let mut rng = task_rng(seed, r as u64);
            let first = bootstrap_rows(&mut rng, x.nrows())?;
            let second = bootstrap_rows(&mut rng, x.nrows())?;
            let la = bootstrap_labels(x, &first, graph, config, &points, eps)?;
            let lb = bootstrap_labels(x, &second, graph, config, &points, eps)?;
            la.iter().zip(&lb).map(|(a, b)| column_agreement(a, b)).collect()
        })
        .collect::<Result<_>>()?;
    let scores = points
        .iter()
        .enumerate()
        .map(|(k, &(gamma1, gamma2))| GridScore {
            gamma1,
            gamma2,
            score: per_rep.iter().map(|s| s[k]).sum::<f64>() / repetitions as f64,
        })
        .collect();
    TuningReport::select("stability", true, scores)
}

/// Simulation-only tuning: fits the validation data at every grid point and
/// maximises product-label ARI against its known labels. ARI is often flat
/// over a range of penalties, so ties resolve to the middle of that range.
pub fn ari_oracle_tune(
    x_valid: &DataMatrix,
    truth: &BiclusterLabels,
    graph: &GraphSpec,
    grid: &TuningGrid,
    config: &AdmmConfig,
    eps: f64,
) -> Result<TuningReport> {
    if truth.row_labels.len() != x_valid.nrows() || truth.col_labels.len() != x_valid.ncols() {
        return Err(Error::DimensionMismatch(
            "truth labels do not match the validation matrix".into(),
        ));
    }
    let (rows, cols) = graph.build(x_valid)?;
    let engine = AdmmEngine::new(x_valid, &rows, &cols, config)?;
    let points = grid.points();
    let truth_product = truth.product_labels();
    let scores = fit_grid(&engine, &points)?
        .iter()
        .zip(&points)
        .map(|(fit, &(gamma1, gamma2))| {
            let labels = extract_labels(fit, &rows, &cols, eps)?;
            Ok(GridScore {
                gamma1,
                gamma2,
                score: adjusted_rand_index(&labels.product_labels(), &truth_product)?,
            })
        })
        .collect::<Result<_>>()?;
    TuningReport::select_central("ari_oracle", true, scores)
}

/// Inputs shared by all tuning methods.
#[derive(Debug, Clone)]
pub struct TuningProblem<'a> {
    pub data: &'a DataMatrix,
    pub graph: &'a GraphSpec,
    pub config: &'a AdmmConfig,
    pub grid: &'a TuningGrid,
    pub seed: u64,
    pub holdout_frac: f64,
    pub repetitions: usize,
    pub fusion_eps: f64,
    /// Known labels of `data`; required by the ARI oracle only.
    pub truth: Option<&'a BiclusterLabels>,
}

impl<'a> TuningProblem<'a> {
    pub fn new(
        data: &'a DataMatrix,
        graph: &'a GraphSpec,
        config: &'a AdmmConfig,
        grid: &'a TuningGrid,
    ) -> Self {
        Self {
            data,
            graph,
            config,
            grid,
            seed: 0,
            holdout_frac: DEFAULT_HOLDOUT_FRAC,
            repetitions: DEFAULT_STABILITY_REPETITIONS,
            fusion_eps: DEFAULT_FUSION_EPS,
            truth: None,
        }
    }
}

pub trait TuningMethod: Send + Sync {
    fn name(&self) -> &'static str;
    fn tune(&self, problem: &TuningProblem<'_>) -> Result<TuningReport>;
}

pub struct Holdout;
pub struct Stability;
pub struct AriOracle;

impl TuningMethod for Holdout {
    fn name(&self) -> &'static str {
        "holdout"
    }

    fn tune(&self, pr: &TuningProblem<'_>) -> Result<TuningReport> {
        let (rows, cols) = pr.graph.build(pr.data)?;
        holdout_validate(pr.data, &rows, &cols, pr.grid, pr.config, pr.holdout_frac, pr.seed)
    }
}

impl TuningMethod for Stability {
    fn name(&self) -> &'static str {
        "stability"
    }

    fn tune(&self, pr: &TuningProblem<'_>) -> Result<TuningReport> {
        stability_select(pr.data, pr.graph, pr.grid, pr.config, pr.repetitions, pr.seed, pr.fusion_eps)
    }
}

impl TuningMethod for AriOracle {
    fn name(&self) -> &'static str {
        "ari_oracle"
    }

    fn tune(&self, pr: &TuningProblem<'_>) -> Result<TuningReport> {
        let truth = pr
            .truth
            .ok_or_else(|| Error::InvalidInput("ARI-oracle tuning needs truth labels".into()))?;
        ari_oracle_tune(pr.data, truth, pr.graph, pr.grid, pr.config, pr.fusion_eps)
    }
}

pub struct TuningRegistry {
    entries: Vec<Box<dyn TuningMethod>>,
}

impl TuningRegistry {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn builtin() -> &'static TuningRegistry {
        static REGISTRY: OnceLock<TuningRegistry> = OnceLock::new();
        REGISTRY.get_or_init(|| {
            let mut r = TuningRegistry::new();
            r.register(Box::new(Holdout));
            r.register(Box::new(Stability));
            r.register(Box::new(AriOracle));
            r
        })
    }

    /// Later registrations shadow earlier ones with the same name.
    pub fn register(&mut self, method: Box<dyn TuningMethod>) {
        self.entries.retain(|m| m.name() != method.name());
        self.entries.push(method);
    }

    pub fn get(&self, name: &str) -> Result<&dyn TuningMethod> {
        self.entries
            .iter()
            .find(|m| m.name() == name)
            .map(|m| m.as_ref())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "tuning method",
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|m| m.name()).collect()
    }
}

impl Default for TuningRegistry {
    fn default() -> Self {
        Self::new()
    }
}
