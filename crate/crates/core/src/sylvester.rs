//! Sylvester equations `M A + A N = G` with symmetric `M` and `N`.
//!
//! Both operators are diagonalised once; each solve is then four dense
//! products and an elementwise division by `lambda_i + theta_j`.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{dense_solve, frobenius, sym_eigen, EigenFactorization, SymmetricOperator};

const SINGULAR_PENCIL: f64 = 1e-12;
/// Largest `n * p` the Kronecker oracle accepts.
pub const KRON_ORACLE_MAX: usize = 400;

/// Cached factorizations of `M` (n x n) and `N` (p x p).
#[derive(Debug, Clone)]
pub struct SylvesterSolver {
    left: EigenFactorization,
    right: EigenFactorization,
    denominators: Array2<f64>,
}

impl SylvesterSolver {
    pub fn new(m: &SymmetricOperator, n: &SymmetricOperator) -> Result<Self> {
        let left = sym_eigen(m)?;
        let right = sym_eigen(n)?;
        let min_sum = match (left.values.first(), right.values.first()) {
            (Some(a), Some(b)) => a + b,
            _ => return Err(Error::DimensionMismatch("empty Sylvester operator".into())),
        };
        if min_sum <= SINGULAR_PENCIL {
            return Err(Error::SingularPencil(min_sum));
        }
        let denominators = Array2::from_shape_fn((m.dim(), n.dim()), |(i, j)| {
            left.values[i] + right.values[j]
        });
        Ok(Self {
            left,
            right,
            denominators,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.denominators.dim()
    }

    pub fn solve(&self, g: &Array2<f64>) -> Result<Array2<f64>> {
        if g.dim() != self.shape() {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side {:?} for operators {:?}",
                g.dim(),
                self.shape()
            )));
        }
        let qm = &self.left.vectors;
        let qn = &self.right.vectors;
        let mut h = qm.t().dot(g).dot(qn);
        h /= &self.denominators;
        Ok(qm.dot(&h).dot(&qn.t()))
    }
}

/// Solves `M A + A N = G` through symmetric eigendecompositions of `M` and `N`.
pub fn solve_sylvester(
    m: &SymmetricOperator,
    n: &SymmetricOperator,
    g: &Array2<f64>,
) -> Result<Array2<f64>> {
    SylvesterSolver::new(m, n)?.solve(g)
}

/// `||M A + A N - G||_F`.
pub fn sylvester_residual(
    m: &SymmetricOperator,
    n: &SymmetricOperator,
    a: &Array2<f64>,
    g: &Array2<f64>,
) -> f64 {
    frobenius(&(m.values().dot(a) + a.dot(n.values()) - g))
}

/// Reference solver: assembles `(I_p (x) M + N (x) I_n) vec(A) = vec(G)`
/// (column-major `vec`) and solves it densely.
///
/// Test-scale only; rejects `n * p > KRON_ORACLE_MAX`.
pub fn kron_oracle(
    m: &SymmetricOperator,
    n: &SymmetricOperator,
    g: &Array2<f64>,
) -> Result<Array2<f64>> {
    let (rows, cols) = (m.dim(), n.dim());
    if g.dim() != (rows, cols) {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side {:?} for operators ({rows}, {cols})",
            g.dim()
        )));
    }
    let size = rows * cols;
    if size > KRON_ORACLE_MAX {
        return Err(Error::InvalidInput(format!(
            "Kronecker oracle limited to n*p <= {KRON_ORACLE_MAX}, got {size}"
        )));
    }
    let vec_index = |i: usize, j: usize| i + j * rows;
    let mut system = Array2::zeros((size, size));
    let mut rhs = Array1::zeros(size);
    for j in 0..cols {
        for i in 0..rows {
            let r = vec_index(i, j);
            rhs[r] = g[[i, j]];
            for i2 in 0..rows {
                system[[r, vec_index(i2, j)]] += m.values()[[i, i2]];
            }
            for j2 in 0..cols {
                system[[r, vec_index(i, j2)]] += n.values()[[j2, j]];
            }
        }
    }
    let x = dense_solve(system, rhs)?;
    Ok(Array2::from_shape_fn((rows, cols), |(i, j)| x[vec_index(i, j)]))
}
