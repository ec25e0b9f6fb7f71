//! Test-only reference solvers and fixtures, independent of the ADMM code.

#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(i, j, weight)` triples.
pub type Edges = Vec<(usize, usize, f64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Penalty {
    L1,
    L2,
}

pub fn norm(q: Penalty, v: &[f64]) -> f64 {
    match q {
        Penalty::L1 => v.iter().map(|x| x.abs()).sum(),
        Penalty::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
    }
}

/// Projection onto the dual-norm ball of radius `c`.
fn project_dual(q: Penalty, u: &mut [f64], c: f64) {
    match q {
        Penalty::L1 => u.iter_mut().for_each(|x| *x = x.clamp(-c, c)),
        Penalty::L2 => {
            let n = norm(Penalty::L2, u);
            if n > c {
                u.iter_mut().for_each(|x| *x *= c / n);
            }
        }
    }
}

pub struct Problem<'a> {
    pub x: &'a Array2<f64>,
    pub rows: &'a Edges,
    pub cols: &'a Edges,
    pub gamma1: f64,
    pub gamma2: f64,
    pub q: Penalty,
    pub compositional: bool,
}

impl Problem<'_> {
    pub fn objective(&self, a: &Array2<f64>) -> f64 {
        let mut f = 0.0;
        for (xv, av) in self.x.iter().zip(a.iter()) {
            f += 0.5 * (xv - av) * (xv - av);
        }
        for &(i, j, w) in self.rows {
            let d: Vec<f64> = (0..a.ncols()).map(|c| a[[i, c]] - a[[j, c]]).collect();
            f += self.gamma1 * w * norm(self.q, &d);
        }
        for &(i, j, w) in self.cols {
            let d: Vec<f64> = (0..a.nrows()).map(|r| a[[r, i]] - a[[r, j]]).collect();
            f += self.gamma2 * w * norm(self.q, &d);
        }
        f
    }
}

pub struct OracleSolution {
    pub a: Array2<f64>,
    pub objective: f64,
    pub gap: f64,
}

fn max_degree(edges: &Edges, dim: usize) -> f64 {
    let mut deg = vec![0usize; dim];
    for &(i, j, _) in edges {
        deg[i] += 1;
        deg[j] += 1;
    }
    deg.into_iter().max().unwrap_or(0) as f64
}

/// Accelerated projected gradient ascent on the Lagrange dual, stopped by the
/// duality gap. For `A = X - K^T u - mu 1^T`, the dual value is
/// `<B, X> - ||B||^2 / 2 - sum(mu)` with `B = X - A`.
pub fn dual_oracle(pr: &Problem<'_>, gap_tol: f64, max_iters: usize) -> OracleSolution {
    let (n, p) = pr.x.dim();
    let lk = 2.0 * max_degree(pr.rows, n) + 2.0 * max_degree(pr.cols, p);
    let lip = if pr.compositional {
        (lk.sqrt() + (p as f64).sqrt()).powi(2)
    } else {
        lk
    };
    let step = 1.0 / lip.max(1e-12);

    let nr = pr.rows.len();
    let nc = pr.cols.len();
    let mut ur = vec![vec![0.0; p]; nr];
    let mut uc = vec![vec![0.0; n]; nc];
    let mut mu = vec![0.0; n];
    let (mut yr, mut yc, mut ymu) = (ur.clone(), uc.clone(), mu.clone());
    let mut t = 1.0f64;

    let primal_of = |ur: &[Vec<f64>], uc: &[Vec<f64>], mu: &[f64]| -> (Array2<f64>, f64) {
        let mut b = Array2::<f64>::zeros((n, p));
        for (l, &(i, j, _)) in pr.rows.iter().enumerate() {
            for c in 0..p {
                b[[i, c]] += ur[l][c];
                b[[j, c]] -= ur[l][c];
            }
        }
        for (k, &(i, j, _)) in pr.cols.iter().enumerate() {
            for r in 0..n {
                b[[r, i]] += uc[k][r];
                b[[r, j]] -= uc[k][r];
            }
        }
        for r in 0..n {
            for c in 0..p {
                b[[r, c]] += mu[r];
            }
        }
        let mut dual = -mu.iter().sum::<f64>();
        for (bv, xv) in b.iter().zip(pr.x.iter()) {
            dual += bv * xv - 0.5 * bv * bv;
        }
        (pr.x - &b, dual)
    };

    let certify = |a: &Array2<f64>, dual: f64| -> (Array2<f64>, f64, f64) {
        let mut feas = a.clone();
        if pr.compositional {
            for r in 0..n {
                let s: f64 = feas.row(r).sum();
                let shift = (1.0 - s) / p as f64;
                feas.row_mut(r).mapv_inplace(|v| v + shift);
            }
        }
        let obj = pr.objective(&feas);
        (feas, obj, obj - dual)
    };

    let mut prev_dual = f64::NEG_INFINITY;
    for it in 0..max_iters {
        let (a, _) = primal_of(&yr, &yc, &ymu);
        let (old_r, old_c, old_mu) = (ur.clone(), uc.clone(), mu.clone());
        for (l, &(i, j, w)) in pr.rows.iter().enumerate() {
            for c in 0..p {
                ur[l][c] = yr[l][c] + step * (a[[i, c]] - a[[j, c]]);
            }
            project_dual(pr.q, &mut ur[l], pr.gamma1 * w);
        }
        for (k, &(i, j, w)) in pr.cols.iter().enumerate() {
            for r in 0..n {
                uc[k][r] = yc[k][r] + step * (a[[r, i]] - a[[r, j]]);
            }
            project_dual(pr.q, &mut uc[k], pr.gamma2 * w);
        }
        if pr.compositional {
            for r in 0..n {
                mu[r] = ymu[r] + step * (a.row(r).sum() - 1.0);
            }
        }
        let (a_new, dual) = primal_of(&ur, &uc, &mu);
        if dual < prev_dual {
            // adaptive restart
            t = 1.0;
        }
        prev_dual = dual;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        t = t_next;
        for l in 0..nr {
            for c in 0..p {
                yr[l][c] = ur[l][c] + beta * (ur[l][c] - old_r[l][c]);
            }
        }
        for k in 0..nc {
            for r in 0..n {
                yc[k][r] = uc[k][r] + beta * (uc[k][r] - old_c[k][r]);
            }
        }
        for r in 0..n {
            ymu[r] = mu[r] + beta * (mu[r] - old_mu[r]);
        }
        if it % 50 == 0 || it + 1 == max_iters {
            let (feas, obj, gap) = certify(&a_new, dual);
            if gap <= gap_tol || it + 1 == max_iters {
                return OracleSolution {
                    a: feas,
                    objective: obj,
                    gap,
                };
            }
        }
    }
    unreachable!()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((n, p), |_| rng.random_range(-scale..scale))
}

/// Two row groups and two column groups plus uniform noise.
pub fn blocky_matrix(seed: u64, n: usize, p: usize) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
    Array2::from_shape_fn((n, p), |(i, j)| {
        let k = usize::from(i % 2 == 0) ^ usize::from(j % 3 == 0);
        levels[k] + rng.random_range(-1.0..1.0)
    })
}

/// Random points on the open simplex.
pub fn simplex_rows(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
    let mut x = Array2::from_shape_fn((n, p), |_| rng.random_range(0.05..1.0));
    for mut row in x.rows_mut() {
        let s = row.sum();
        row /= s;
    }
    x
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
