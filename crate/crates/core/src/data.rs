//! Dense observation-by-feature data matrix.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// An `n x p` matrix of finite reals: rows are observations, columns features.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
}

impl DataMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry {v} at row {i}, column {j}"
            )));
        }
        Ok(Self { values })
    }

    /// Checks the shape requirement of a biclustering fit (`n >= 2`, `p >= 2`).
    pub fn for_biclustering(values: Array2<f64>) -> Result<Self> {
        let m = Self::new(values)?;
        if m.nrows() < 2 || m.ncols() < 2 {
            return Err(Error::InvalidInput(format!(
                "biclustering needs at least 2 rows and 2 columns, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((n, p), flat)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        Self::new(values)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }

    /// Fails on the first row whose sum is more than `tol` away from one.
    pub fn check_compositional(&self, tol: f64) -> Result<()> {
        for (i, row) in self.values.outer_iter().enumerate() {
            let sum = row.sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::NotCompositional { row: i, sum });
            }
        }
        Ok(())
    }

    /// Copy centred at the grand mean and scaled to unit Frobenius norm.
    ///
    /// Useful as the input to kernel-weight construction when the raw data scale
    /// would push `exp(-phi d^2)` into underflow.
    pub fn standardized(&self) -> DataMatrix {
        let (mean, scale) = self.standardization();
        DataMatrix {
            values: self.values.mapv(|v| (v - mean) / scale),
        }
    }

    /// `(grand mean, scale)` used by [`standardized`](Self::standardized);
    /// the scale is 1 for a constant matrix.
    pub fn standardization(&self) -> (f64, f64) {
        let mean = self.values.mean().unwrap_or(0.0);
        let norm = self.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>().sqrt();
        (mean, if norm > 0.0 { norm } else { 1.0 })
    }
}

impl AsRef<Array2<f64>> for DataMatrix {
    fn as_ref(&self) -> &Array2<f64> {
        &self.values
    }
}
