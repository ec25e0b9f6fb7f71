//! bi-ADMM and its compositional variant biC-ADMM.
//!
//! Each iteration solves a Sylvester equation for the primal matrix `A`,
//! shrinks the row and column difference variables `V` and `Z` with the
//! configured proximal map, and takes a dual ascent step. With
//! `compositional` set, the extra row-sum constraint `A 1_p = 1_n` is carried
//! by its own multiplier `lambda3`.

use ndarray::{Array1, Array2, ArrayView1, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::SymmetricOperator;
use crate::prox::{NormKind, ProxOperator};
use crate::sylvester::SylvesterSolver;
use crate::weights::WeightedEdgeSet;

/// Row sums of compositional input may deviate from one by at most this much.
pub const COMPOSITIONAL_INPUT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub gamma1: f64,
    pub gamma2: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub nu3: f64,
    pub norm: NormKind,
    pub max_iters: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub compositional: bool,
}

impl AdmmConfig {
    /// Defaults for unconstrained data: `nu1 = nu2 = 8`.
    pub fn general() -> Self {
        Self {
            gamma1: 0.0,
            gamma2: 0.0,
            nu1: 8.0,
            nu2: 8.0,
            nu3: 8.0,
            norm: NormKind::L2,
            max_iters: 10_000,
            tol_primal: 1e-6,
            tol_dual: 1e-6,
            compositional: false,
        }
    }

    /// Defaults for relative-abundance data: `nu1 = nu2 = nu3 = 1`.
    pub fn compositional() -> Self {
        Self {
            nu1: 1.0,
            nu2: 1.0,
            nu3: 1.0,
            compositional: true,
            ..Self::general()
        }
    }

    pub fn with_gammas(mut self, gamma1: f64, gamma2: f64) -> Self {
        self.gamma1 = gamma1;
        self.gamma2 = gamma2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, g) in [("gamma1", self.gamma1), ("gamma2", self.gamma2)] {
            if !(g >= 0.0 && g.is_finite()) {
                return bad(format!("{name} = {g} must be finite and >= 0"));
            }
        }
        for (name, nu) in [("nu1", self.nu1), ("nu2", self.nu2)] {
            if !(nu > 0.0 && nu.is_finite()) {
                return bad(format!("{name} = {nu} must be finite and > 0"));
            }
        }
        if self.compositional && !(self.nu3 > 0.0 && self.nu3.is_finite()) {
            return bad(format!("nu3 = {} must be finite and > 0", self.nu3));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1".into());
        }
        for (name, t) in [("tol_primal", self.tol_primal), ("tol_dual", self.tol_dual)] {
            if !(t >= 0.0) {
                return bad(format!("{name} = {t} must be >= 0"));
            }
        }
        Ok(())
    }
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self::general()
    }
}

/// Primal, splitting and dual variables of one ADMM iterate.
///
/// `v` holds one length-`p` row per row edge, `z` one length-`n` row per column edge.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub a: Array2<f64>,
    pub v: Array2<f64>,
    pub z: Array2<f64>,
    pub lambda1: Array2<f64>,
    pub lambda2: Array2<f64>,
    /// Row-sum multiplier; all zeros for unconstrained fits.
    pub lambda3: Array1<f64>,
    pub iter: usize,
}

impl AdmmState {
    fn zeros(n: usize, p: usize, n_row_edges: usize, n_col_edges: usize) -> Self {
        Self {
            a: Array2::zeros((n, p)),
            v: Array2::zeros((n_row_edges, p)),
            z: Array2::zeros((n_col_edges, n)),
            lambda1: Array2::zeros((n_row_edges, p)),
            lambda2: Array2::zeros((n_col_edges, n)),
            lambda3: Array1::zeros(n),
            iter: 0,
        }
    }

    fn check_finite(&self) -> Result<()> {
        let blocks: [(&'static str, bool); 6] = [
            ("A", self.a.iter().all(|v| v.is_finite())),
            ("V", self.v.iter().all(|v| v.is_finite())),
            ("Z", self.z.iter().all(|v| v.is_finite())),
            ("Lambda1", self.lambda1.iter().all(|v| v.is_finite())),
            ("Lambda2", self.lambda2.iter().all(|v| v.is_finite())),
            ("lambda3", self.lambda3.iter().all(|v| v.is_finite())),
        ];
        match blocks.iter().find(|(_, ok)| !ok) {
            Some(&(block, _)) => Err(Error::NonFinite {
                iteration: self.iter,
                block,
            }),
            None => Ok(()),
        }
    }
}

/// Starting point of a fit.
#[derive(Debug, Clone, Copy)]
pub enum Initialization<'a> {
    /// `V`, `Z` set to the row and column differences of `X`; duals zero.
    Differences,
    /// `V`, `Z` and all duals drawn uniformly from `[-scale, scale]` with
    /// `scale = max |X_ij|`.
    Random { seed: u64 },
    /// Continue from a previous iterate (e.g. the neighbouring grid point).
    Warm(&'a AdmmState),
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub state: AdmmState,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub converged: bool,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl FitResult {
    pub fn a_hat(&self) -> &Array2<f64> {
        &self.state.a
    }

    pub fn v_final(&self) -> &Array2<f64> {
        &self.state.v
    }

    pub fn z_final(&self) -> &Array2<f64> {
        &self.state.z
    }
}

fn laplacian(edges: &WeightedEdgeSet, dim: usize) -> Array2<f64> {
    let mut l = Array2::zeros((dim, dim));
    for &(a, b) in edges.edges() {
        l[[a, a]] += 1.0;
        l[[b, b]] += 1.0;
        l[[a, b]] -= 1.0;
        l[[b, a]] -= 1.0;
    }
    l
}

fn check_edges(rows: &WeightedEdgeSet, cols: &WeightedEdgeSet, n: usize, p: usize) -> Result<()> {
    if rows.dimension() != n || cols.dimension() != p {
        return Err(Error::DimensionMismatch(format!(
            "edge sets over ({}, {}) for a {n}x{p} matrix",
            rows.dimension(),
            cols.dimension()
        )));
    }
    Ok(())
}

/// `M = I_n + nu1 L_rows` and `N = nu2 L_cols (+ nu3 1 1^T)`.
///
/// The fusion weights do not enter: they only scale the proximal thresholds.
pub fn assemble_mn(
    rows: &WeightedEdgeSet,
    cols: &WeightedEdgeSet,
    config: &AdmmConfig,
    n: usize,
    p: usize,
) -> Result<(SymmetricOperator, SymmetricOperator)> {
    check_edges(rows, cols, n, p)?;
    let m = Array2::<f64>::eye(n) + laplacian(rows, n) * config.nu1;
    let mut nn = laplacian(cols, p) * config.nu2;
    if config.compositional {
        nn += config.nu3;
    }
    Ok((SymmetricOperator::new(m)?, SymmetricOperator::new(nn)?))
}

/// Right-hand side of the A-update:
/// `G = X + sum_l (e_l1 - e_l2)(lambda1_l + nu1 v_l)^T
///        + sum_k (lambda2_k + nu2 z_k)(e*_k1 - e*_k2)^T [+ nu3 s 1_p^T]`
/// with `s = 1_n + lambda3 / nu3`.
pub fn assemble_g(
    x: &Array2<f64>,
    state: &AdmmState,
    rows: &WeightedEdgeSet,
    cols: &WeightedEdgeSet,
    config: &AdmmConfig,
) -> Array2<f64> {
    let mut g = x.clone();
    for (l, &(a, b)) in rows.edges().iter().enumerate() {
        let term = &state.lambda1.row(l) + &(&state.v.row(l) * config.nu1);
        {
            let mut ra = g.row_mut(a);
            ra += &term;
        }
        let mut rb = g.row_mut(b);
        rb -= &term;
    }
    for (k, &(a, b)) in cols.edges().iter().enumerate() {
        let term = &state.lambda2.row(k) + &(&state.z.row(k) * config.nu2);
        {
            let mut ca = g.column_mut(a);
            ca += &term;
        }
        let mut cb = g.column_mut(b);
        cb -= &term;
    }
    if config.compositional {
        // nu3 * s = nu3 + lambda3
        let shift = state.lambda3.mapv(|l| config.nu3 + l);
        g += &shift.insert_axis(Axis(1));
    }
    g
}

fn l2(v: ArrayView1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Primal and dual residuals of `state` relative to the previous iterate.
///
/// Primal: largest constraint violation over row blocks, column blocks and
/// (compositional) the row-sum block. Dual: `nu` times the largest change of
/// a `V` or `Z` block.
pub fn residuals(
    state: &AdmmState,
    prev: &AdmmState,
    rows: &WeightedEdgeSet,
    cols: &WeightedEdgeSet,
    config: &AdmmConfig,
) -> (f64, f64) {
    let a = &state.a;
    let mut primal: f64 = 0.0;
    for (l, &(i, j)) in rows.edges().iter().enumerate() {
        let r = &state.v.row(l) - &a.row(i) + a.row(j);
        primal = primal.max(l2(r.view()));
    }
    for (k, &(i, j)) in cols.edges().iter().enumerate() {
        let r = &state.z.row(k) - &a.column(i) + a.column(j);
        primal = primal.max(l2(r.view()));
    }
    if config.compositional {
        let r = a.sum_axis(Axis(1)).mapv(|s| 1.0 - s);
        primal = primal.max(l2(r.view()));
    }
    let dv = state
        .v
        .outer_iter()
        .zip(prev.v.outer_iter())
        .map(|(x, y)| l2((&x - &y).view()))
        .fold(0.0, f64::max);
    let dz = state
        .z
        .outer_iter()
        .zip(prev.z.outer_iter())
        .map(|(x, y)| l2((&x - &y).view()))
        .fold(0.0, f64::max);
    (primal, (config.nu1 * dv).max(config.nu2 * dz))
}

/// Convex biclustering objective
/// `0.5 ||X - A||_F^2 + gamma1 sum_l w_l ||A_l1. - A_l2.||_q + gamma2 sum_k u_k ||a_k1 - a_k2||_q`.
pub fn objective(
    x: &Array2<f64>,
    a: &Array2<f64>,
    rows: &WeightedEdgeSet,
    cols: &WeightedEdgeSet,
    gamma1: f64,
    gamma2: f64,
    q: NormKind,
) -> f64 {
    let op = q.operator();
    let fit = 0.5 * Zip::from(x).and(a).fold(0.0, |acc, xv, av| acc + (xv - av) * (xv - av));
    let mut buf = Vec::new();
    let mut row_pen = 0.0;
    for ((i, j), w) in rows.iter() {
        buf.clear();
        buf.extend(a.row(i).iter().zip(a.row(j).iter()).map(|(u, v)| u - v));
        row_pen += w * op.norm(&buf);
    }
    let mut col_pen = 0.0;
    for ((i, j), w) in cols.iter() {
        buf.clear();
        buf.extend(a.column(i).iter().zip(a.column(j).iter()).map(|(u, v)| u - v));
        col_pen += w * op.norm(&buf);
    }
    fit + gamma1 * row_pen + gamma2 * col_pen
}

/// Residuals produced by one update cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResiduals {
    pub primal: f64,
    pub dual: f64,
}

/// A data matrix, its fusion graphs and the factorised A-update operators.
///
/// `M` and `N` depend only on the graphs and the augmentation constants, so a
/// single engine serves every `(gamma1, gamma2)` on a tuning grid.
pub struct AdmmEngine {
    x: Array2<f64>,
    rows: WeightedEdgeSet,
    cols: WeightedEdgeSet,
    config: AdmmConfig,
    m: SymmetricOperator,
    n: SymmetricOperator,
    solver: SylvesterSolver,
}

impl AdmmEngine {
    pub fn new(
        x: &DataMatrix,
        rows: &WeightedEdgeSet,
        cols: &WeightedEdgeSet,
        config: &AdmmConfig,
    ) -> Result<Self> {
        config.validate()?;
        let (n, p) = (x.nrows(), x.ncols());
        if config.compositional {
            x.check_compositional(COMPOSITIONAL_INPUT_TOL)?;
        }
        let (m, nn) = assemble_mn(rows, cols, config, n, p)?;
        let solver = SylvesterSolver::new(&m, &nn)?;
        Ok(Self {
            x: x.values().clone(),
            rows: rows.clone(),
            cols: cols.clone(),
            config: config.clone(),
            m,
            n: nn,
            solver,
        })
    }

    pub fn config(&self) -> &AdmmConfig {
        &self.config
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn row_edges(&self) -> &WeightedEdgeSet {
        &self.rows
    }

    pub fn col_edges(&self) -> &WeightedEdgeSet {
        &self.cols
    }

    /// The `(M, N)` pair of the A-update.
    pub fn operators(&self) -> (&SymmetricOperator, &SymmetricOperator) {
        (&self.m, &self.n)
    }

    pub fn initial_state(&self, init: Initialization<'_>) -> Result<AdmmState> {
        let (n, p) = self.x.dim();
        let mut state = AdmmState::zeros(n, p, self.rows.len(), self.cols.len());
        match init {
            Initialization::Differences => {
                for (l, &(i, j)) in self.rows.edges().iter().enumerate() {
                    state.v.row_mut(l).assign(&(&self.x.row(i) - &self.x.row(j)));
                }
                for (k, &(i, j)) in self.cols.edges().iter().enumerate() {
                    state.z.row_mut(k).assign(&(&self.x.column(i) - &self.x.column(j)));
                }
                state.a.assign(&self.x);
            }
            Initialization::Random { seed } => {
                let scale = self.x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut fill = |arr: &mut Array2<f64>| {
                    arr.mapv_inplace(|_| rng.random_range(-scale..scale));
                };
                fill(&mut state.v);
                fill(&mut state.z);
                fill(&mut state.lambda1);
                fill(&mut state.lambda2);
                if self.config.compositional {
                    state.lambda3.mapv_inplace(|_| rng.random_range(-scale..scale));
                }
                state.a.assign(&self.x);
            }
            Initialization::Warm(prev) => {
                if prev.a.dim() != (n, p)
                    || prev.v.dim() != state.v.dim()
                    || prev.z.dim() != state.z.dim()
                {
                    return Err(Error::DimensionMismatch(
                        "warm start does not match this problem".into(),
                    ));
                }
                state = prev.clone();
                state.iter = 0;
                if !self.config.compositional {
                    state.lambda3.fill(0.0);
                }
            }
        }
        Ok(state)
    }

    pub fn assemble_g(&self, state: &AdmmState) -> Array2<f64> {
        assemble_g(&self.x, state, &self.rows, &self.cols, &self.config)
    }

    /// One full update cycle (A, then V, then Z, then the duals).
    pub fn step(&self, state: &mut AdmmState, gamma1: f64, gamma2: f64) -> Result<StepResiduals> {
        let cfg = &self.config;
        let op: &dyn ProxOperator = cfg.norm.operator();
        state.iter += 1;

        let g = self.assemble_g(state);
        state.a = self.solver.solve(&g)?;
        if state.a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                iteration: state.iter,
                block: "A",
            });
        }

        let mut primal: f64 = 0.0;
        let mut dual_v: f64 = 0.0;
        let mut dual_z: f64 = 0.0;

        let p = self.x.ncols();
        let mut diff = vec![0.0; p.max(self.x.nrows())];
        let mut u = vec![0.0; diff.len()];

        let a = &state.a;
        for (l, ((i, j), w)) in self.rows.iter().enumerate() {
            let sigma = gamma1 * w / cfg.nu1;
            let (d, buf) = (&mut diff[..p], &mut u[..p]);
            let ai = a.row(i);
            let aj = a.row(j);
            let lam = state.lambda1.row(l);
            for c in 0..p {
                d[c] = ai[c] - aj[c];
                buf[c] = d[c] - lam[c] / cfg.nu1;
            }
            op.prox_in_place(buf, sigma);
            let mut v = state.v.row_mut(l);
            let mut lam = state.lambda1.row_mut(l);
            let (mut change, mut viol) = (0.0, 0.0);
            for c in 0..p {
                change += (buf[c] - v[c]) * (buf[c] - v[c]);
                let r = buf[c] - d[c];
                viol += r * r;
                v[c] = buf[c];
                lam[c] += cfg.nu1 * r;
            }
            dual_v = dual_v.max(change.sqrt());
            primal = primal.max(viol.sqrt());
        }

        let n = self.x.nrows();
        let at = a.t();
        for (k, ((i, j), w)) in self.cols.iter().enumerate() {
            let sigma = gamma2 * w / cfg.nu2;
            let (d, buf) = (&mut diff[..n], &mut u[..n]);
            let ai = at.row(i);
            let aj = at.row(j);
            let lam = state.lambda2.row(k);
            for r in 0..n {
                d[r] = ai[r] - aj[r];
                buf[r] = d[r] - lam[r] / cfg.nu2;
            }
            op.prox_in_place(buf, sigma);
            let mut z = state.z.row_mut(k);
            let mut lam = state.lambda2.row_mut(k);
            let (mut change, mut viol) = (0.0, 0.0);
            for r in 0..n {
                change += (buf[r] - z[r]) * (buf[r] - z[r]);
                let res = buf[r] - d[r];
                viol += res * res;
                z[r] = buf[r];
                lam[r] += cfg.nu2 * res;
            }
            dual_z = dual_z.max(change.sqrt());
            primal = primal.max(viol.sqrt());
        }

        if cfg.compositional {
            let sums = state.a.sum_axis(Axis(1));
            let mut viol = 0.0;
            for (l3, s) in state.lambda3.iter_mut().zip(sums.iter()) {
                let r = 1.0 - s;
                viol += r * r;
                *l3 += cfg.nu3 * r;
            }
            primal = primal.max(f64::sqrt(viol));
        }

        state.check_finite()?;
        Ok(StepResiduals {
            primal,
            dual: (cfg.nu1 * dual_v).max(cfg.nu2 * dual_z),
        })
    }

    /// Runs at the configured `(gamma1, gamma2)`.
    pub fn fit(&self, init: Initialization<'_>) -> Result<FitResult> {
        self.fit_at(self.config.gamma1, self.config.gamma2, init)
    }

    pub fn fit_at(&self, gamma1: f64, gamma2: f64, init: Initialization<'_>) -> Result<FitResult> {
        for (name, g) in [("gamma1", gamma1), ("gamma2", gamma2)] {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} = {g} must be finite and >= 0")));
            }
        }
        let cfg = &self.config;
        let mut state = self.initial_state(init)?;
        let mut res = StepResiduals {
            primal: f64::INFINITY,
            dual: f64::INFINITY,
        };
        let mut converged = false;
        while state.iter < cfg.max_iters {
            res = self.step(&mut state, gamma1, gamma2)?;
            if res.primal <= cfg.tol_primal && res.dual <= cfg.tol_dual {
                converged = true;
                break;
            }
        }
        let objective = objective(
            &self.x,
            &state.a,
            &self.rows,
            &self.cols,
            gamma1,
            gamma2,
            cfg.norm,
        );
        Ok(FitResult {
            iterations: state.iter,
            state,
            primal_residual: res.primal,
            dual_residual: res.dual,
            objective,
            converged,
            gamma1,
            gamma2,
        })
    }
}

/// Fits `X` at the configured tuning parameters from the default initialisation.
pub fn fit(
    x: &DataMatrix,
    rows: &WeightedEdgeSet,
    cols: &WeightedEdgeSet,
    config: &AdmmConfig,
) -> Result<FitResult> {
    AdmmEngine::new(x, rows, cols, config)?.fit(Initialization::Differences)
}

/// Largest `|1 - sum_j A_ij|` over rows.
pub fn max_row_sum_deviation(a: &Array2<f64>) -> f64 {
    a.sum_axis(Axis(1))
        .iter()
        .fold(0.0, |m: f64, s| m.max((1.0 - s).abs()))
}
