//! Dense symmetric eigendecomposition.
//!
//! Householder reduction to tridiagonal form followed by implicit symmetric QR
//! sweeps with Wilkinson shifts. Deterministic: identical inputs give
//! bitwise-identical factorizations.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

const ASYMMETRY_TOL: f64 = 1e-10;
const DEFLATION_TOL: f64 = 1e-14;
const SWEEPS_PER_DIM: usize = 100;

/// A real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricOperator {
    values: Array2<f64>,
}

impl SymmetricOperator {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "symmetric operator must be square, got {:?}",
                values.dim()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("symmetric operator has non-finite entries".into()));
        }
        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let d = values.nrows();
        for i in 0..d {
            for j in i + 1..d {
                if (values[[i, j]] - values[[j, i]]).abs() > ASYMMETRY_TOL * scale {
                    return Err(Error::InvalidInput(format!(
                        "operator is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

/// `S = Q diag(values) Q^T` with orthogonal `Q` and ascending eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenFactorization {
    pub vectors: Array2<f64>,
    pub values: Array1<f64>,
}

impl EigenFactorization {
    pub fn reconstruct(&self) -> Array2<f64> {
        let scaled = &self.vectors * &self.values.view().insert_axis(ndarray::Axis(0));
        scaled.dot(&self.vectors.t())
    }
}

/// Eigendecomposition of a symmetric operator, eigenvalues ascending.
pub fn sym_eigen(s: &SymmetricOperator) -> Result<EigenFactorization> {
    let d = s.dim();
    if d == 0 {
        return Ok(EigenFactorization {
            vectors: Array2::zeros((0, 0)),
            values: Array1::zeros(0),
        });
    }
    // symmetrise exactly so the reduction sees a symmetric matrix
    let a = (&s.values + &s.values.t()) * 0.5;
    let (mut q, mut diag, mut off) = tridiagonalize(a);
    implicit_qr(&mut diag, &mut off, &mut q)?;

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]).then(i.cmp(&j)));
    let values = Array1::from_iter(order.iter().map(|&i| diag[i]));
    let mut vectors = Array2::zeros((d, d));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&q.column(src));
    }
    Ok(EigenFactorization { vectors, values })
}

/// Returns `(Q, diag, off)` with `A = Q T Q^T`; `off[k]` couples `k` and `k+1`.
fn tridiagonalize(mut a: Array2<f64>) -> (Array2<f64>, Vec<f64>, Vec<f64>) {
    let d = a.nrows();
    let mut q = Array2::<f64>::eye(d);
    let mut v = vec![0.0; d];
    let mut w = vec![0.0; d];

    for k in 0..d.saturating_sub(2) {
        let m = k + 1;
        let alpha_sq: f64 = (m..d).map(|i| a[[i, k]] * a[[i, k]]).sum();
        if alpha_sq == 0.0 {
            continue;
        }
        let x0 = a[[m, k]];
        let alpha = if x0 >= 0.0 { -alpha_sq.sqrt() } else { alpha_sq.sqrt() };
        // v = x - alpha e1, H = I - 2 v v^T / (v^T v)
        for i in m..d {
            v[i] = a[[i, k]];
        }
        v[m] -= alpha;
        let vnorm_sq: f64 = (m..d).map(|i| v[i] * v[i]).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm_sq;

        // A <- H A H on the trailing block, via p = beta A v, w = p - (beta p.v / 2) v
        for i in m..d {
            w[i] = beta * (m..d).map(|j| a[[i, j]] * v[j]).sum::<f64>();
        }
        let kappa = 0.5 * beta * (m..d).map(|i| w[i] * v[i]).sum::<f64>();
        for i in m..d {
            w[i] -= kappa * v[i];
        }
        for i in m..d {
            for j in m..d {
                a[[i, j]] -= v[i] * w[j] + w[i] * v[j];
            }
        }
        a[[m, k]] = alpha;
        a[[k, m]] = alpha;
        for i in m + 1..d {
            a[[i, k]] = 0.0;
            a[[k, i]] = 0.0;
        }

        // Q <- Q H
        for r in 0..d {
            let dot: f64 = (m..d).map(|j| q[[r, j]] * v[j]).sum();
            let f = beta * dot;
            for j in m..d {
                q[[r, j]] -= f * v[j];
            }
        }
    }

    let diag = (0..d).map(|i| a[[i, i]]).collect();
    let off = (0..d.saturating_sub(1)).map(|i| a[[i + 1, i]]).collect();
    (q, diag, off)
}

fn negligible(off: f64, d0: f64, d1: f64) -> bool {
    off.abs() <= DEFLATION_TOL * (d0.abs() + d1.abs()) || off.abs() < f64::MIN_POSITIVE
}

fn implicit_qr(diag: &mut [f64], off: &mut [f64], q: &mut Array2<f64>) -> Result<()> {
    let d = diag.len();
    let cap = SWEEPS_PER_DIM * d.max(1);
    let mut sweeps = 0;
    let mut hi = d.saturating_sub(1);
    while hi > 0 {
        if negligible(off[hi - 1], diag[hi - 1], diag[hi]) {
            off[hi - 1] = 0.0;
            hi -= 1;
            continue;
        }
        let mut lo = hi - 1;
        while lo > 0 {
            if negligible(off[lo - 1], diag[lo - 1], diag[lo]) {
                off[lo - 1] = 0.0;
                break;
            }
            lo -= 1;
        }
        sweeps += 1;
        if sweeps > cap {
            return Err(Error::EigenNoConvergence(cap));
        }
        qr_sweep(diag, off, q, lo, hi);
    }
    Ok(())
}

/// One Wilkinson-shifted implicit QR step on the unreduced block `lo..=hi`.
fn qr_sweep(diag: &mut [f64], off: &mut [f64], q: &mut Array2<f64>, lo: usize, hi: usize) {
    let t = off[hi - 1];
    let delta = 0.5 * (diag[hi - 1] - diag[hi]);
    let sign = if delta >= 0.0 { 1.0 } else { -1.0 };
    let shift = diag[hi] - t * t / (delta + sign * delta.hypot(t));

    let mut x = diag[lo] - shift;
    let mut z = off[lo];
    let rows = q.nrows();
    for k in lo..hi {
        let r = x.hypot(z);
        let (c, s) = if r == 0.0 { (1.0, 0.0) } else { (x / r, z / r) };
        if k > lo {
            off[k - 1] = r;
        }
        let a = diag[k];
        let b = off[k];
        let e = diag[k + 1];
        diag[k] = c * c * a + 2.0 * c * s * b + s * s * e;
        diag[k + 1] = s * s * a - 2.0 * c * s * b + c * c * e;
        off[k] = c * s * (e - a) + (c * c - s * s) * b;
        if k + 1 < hi {
            z = s * off[k + 1];
            off[k + 1] *= c;
            x = off[k];
        }
        for i in 0..rows {
            let qk = q[[i, k]];
            let qk1 = q[[i, k + 1]];
            q[[i, k]] = c * qk + s * qk1;
            q[[i, k + 1]] = c * qk1 - s * qk;
        }
    }
}

/// Solves the dense square system `a x = b` by LU with partial pivoting.
pub(crate) fn dense_solve(mut a: Array2<f64>, mut b: Array1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    if !a.is_square() || b.len() != n {
        return Err(Error::DimensionMismatch("dense solve needs square system".into()));
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[[i, col]].abs().total_cmp(&a[[j, col]].abs()))
            .unwrap_or(col);
        if a[[pivot, col]] == 0.0 {
            return Err(Error::InvalidInput("singular linear system".into()));
        }
        if pivot != col {
            for j in 0..n {
                a.swap([col, j], [pivot, j]);
            }
            b.swap(col, pivot);
        }
        let p = a[[col, col]];
        for i in col + 1..n {
            let f = a[[i, col]] / p;
            if f == 0.0 {
                continue;
            }
            a[[i, col]] = 0.0;
            for j in col + 1..n {
                a[[i, j]] -= f * a[[col, j]];
            }
            b[i] -= f * b[col];
        }
    }
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[[i, j]] * b[j]).sum();
        b[i] = (b[i] - s) / a[[i, i]];
    }
    Ok(b)
}

pub(crate) fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}
