//! Fusion graphs over rows or columns and their Gaussian-kernel k-NN weights.

use std::collections::BTreeMap;

use ndarray::{ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// Which dimension of the data matrix a graph lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphAxis {
    Row,
    Column,
}

/// Undirected weighted edge list over `0..dimension`.
///
/// Pairs are stored with `a < b`, sorted, unique, and with strictly positive weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEdgeSet {
    edges: Vec<(usize, usize)>,
    weights: Vec<f64>,
    dimension: usize,
}

impl WeightedEdgeSet {
    /// Builds an edge set from `(a, b, weight)` triples.
    ///
    /// Pairs may be given in either order; zero weights are dropped.
    pub fn new(dimension: usize, triples: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (a, b, w) in triples {
            if a == b {
                return Err(Error::InvalidInput(format!("self-loop at index {a}")));
            }
            if a >= dimension || b >= dimension {
                return Err(Error::InvalidInput(format!(
                    "edge ({a}, {b}) out of range for dimension {dimension}"
                )));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidInput(format!("edge ({a}, {b}) has weight {w}")));
            }
            let key = (a.min(b), a.max(b));
            if map.insert(key, w).is_some() {
                return Err(Error::InvalidInput(format!("duplicate edge {key:?}")));
            }
        }
        let (edges, weights) = map.into_iter().filter(|&(_, w)| w > 0.0).unzip();
        Ok(Self {
            edges,
            weights,
            dimension,
        })
    }

    pub fn empty(dimension: usize) -> Self {
        Self {
            edges: Vec::new(),
            weights: Vec::new(),
            dimension,
        }
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.edges.iter().copied().zip(self.weights.iter().copied())
    }

    /// Same edges with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            edges: self.edges.clone(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
            dimension: self.dimension,
        }
    }

    /// Relabels endpoints through `perm`, where item `i` moves to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.dimension {
            return Err(Error::DimensionMismatch(format!(
                "permutation of length {} for dimension {}",
                perm.len(),
                self.dimension
            )));
        }
        Self::new(
            self.dimension,
            self.iter().map(|((a, b), w)| (perm[a], perm[b], w)),
        )
    }
}

/// Complete graph on `dimension` items with unit weights.
pub fn full_edge_set(dimension: usize) -> Result<WeightedEdgeSet> {
    if dimension < 2 {
        return Err(Error::InvalidInput(format!(
            "complete graph needs dimension >= 2, got {dimension}"
        )));
    }
    let mut edges = Vec::with_capacity(dimension * (dimension - 1) / 2);
    for a in 0..dimension {
        for b in a + 1..dimension {
            edges.push((a, b));
        }
    }
    let weights = vec![1.0; edges.len()];
    Ok(WeightedEdgeSet {
        edges,
        weights,
        dimension,
    })
}

fn squared_distance(x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Gaussian-kernel weights on the symmetrised `m`-nearest-neighbour graph.
///
/// Edge `(a, b)` is present when either item is among the other's `m` nearest
/// neighbours in squared Euclidean distance (ties go to the lower index), with
/// weight `exp(-phi * d^2)`. Distances are computed on `x` exactly as given.
pub fn build_knn_weights(
    x: &DataMatrix,
    axis: GraphAxis,
    m: usize,
    phi: f64,
) -> Result<WeightedEdgeSet> {
    let items = match axis {
        GraphAxis::Row => x.view(),
        GraphAxis::Column => x.view().reversed_axes(),
    };
    let dimension = items.nrows();
    if dimension < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 items along {axis:?}, got {dimension}"
        )));
    }
    if m == 0 || m >= dimension {
        return Err(Error::InvalidInput(format!(
            "neighbour count {m} must lie in 1..{dimension}"
        )));
    }
    if !(phi >= 0.0 && phi.is_finite()) {
        return Err(Error::InvalidInput(format!("kernel scale phi = {phi} must be >= 0")));
    }

    let mut dist = vec![0.0; dimension * dimension];
    for a in 0..dimension {
        for b in a + 1..dimension {
            let d = squared_distance(items.index_axis(Axis(0), a), items.index_axis(Axis(0), b));
            dist[a * dimension + b] = d;
            dist[b * dimension + a] = d;
        }
    }

    let mut pairs = BTreeMap::new();
    let mut order: Vec<usize> = Vec::with_capacity(dimension);
    for a in 0..dimension {
        order.clear();
        order.extend((0..dimension).filter(|&b| b != a));
        let row = &dist[a * dimension..(a + 1) * dimension];
        order.sort_by(|&i, &j| row[i].total_cmp(&row[j]).then(i.cmp(&j)));
        for &b in order.iter().take(m) {
            pairs.insert((a.min(b), a.max(b)), row[b]);
        }
    }

    WeightedEdgeSet::new(
        dimension,
        pairs.into_iter().map(|((a, b), d)| (a, b, (-phi * d).exp())),
    )
}

/// Rescales row weights to total `1/sqrt(p)` and column weights to total `1/sqrt(n)`.
///
/// This puts the two fusion penalties on a common scale so that a single
/// tuning parameter can drive both.
pub fn rescale_single_gamma(
    rows: &WeightedEdgeSet,
    cols: &WeightedEdgeSet,
    n: usize,
    p: usize,
) -> Result<(WeightedEdgeSet, WeightedEdgeSet)> {
    let row_total = rows.total_weight();
    let col_total = cols.total_weight();
    if !(row_total > 0.0) {
        return Err(Error::InvalidInput("row weights sum to zero".into()));
    }
    if !(col_total > 0.0) {
        return Err(Error::InvalidInput("column weights sum to zero".into()));
    }
    let row_target = 1.0 / (p as f64).sqrt();
    let col_target = 1.0 / (n as f64).sqrt();
    Ok((
        rows.scaled(row_target / row_total),
        cols.scaled(col_target / col_total),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn brute_force_knn(points: &[f64], m: usize) -> Vec<(usize, usize)> {
        // every pair, every item: rank neighbours by enumeration
        let n = points.len();
        let mut out = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                let in_knn = |i: usize, j: usize| {
                    let dij = (points[i] - points[j]).powi(2);
                    let closer = (0..n)
                        .filter(|&k| k != i && k != j)
                        .filter(|&k| {
                            let dik = (points[i] - points[k]).powi(2);
                            dik < dij || (dik == dij && k < j)
                        })
                        .count();
                    closer < m
                };
                if in_knn(a, b) || in_knn(b, a) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    #[test]
    fn identical_rows_get_unit_weight() {
        let x = DataMatrix::new(array![[1.0, 2.0], [1.0, 2.0], [5.0, 5.0]]).unwrap();
        let g = build_knn_weights(&x, GraphAxis::Row, 1, 1.0).unwrap();
        let w = g.iter().find(|&(e, _)| e == (0, 1)).unwrap().1;
        assert_eq!(w, 1.0);
    }

    #[test]
    fn points_on_a_line() {
        let x = DataMatrix::new(array![[0.0, 0.0], [1.0, 0.0], [10.0, 0.0]]).unwrap();
        let g = build_knn_weights(&x, GraphAxis::Row, 1, 0.0).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.weights(), &[1.0, 1.0]);
        assert_eq!(brute_force_knn(&[0.0, 1.0, 10.0], 1), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn knn_matches_brute_force_on_a_line() {
        let pts = [0.3, -2.0, 4.5, 4.4, 0.0, 7.0, -1.0, 2.2];
        let x = DataMatrix::new(ndarray::Array2::from_shape_vec((pts.len(), 1), pts.to_vec()).unwrap())
            .unwrap();
        for m in 1..pts.len() {
            let g = build_knn_weights(&x, GraphAxis::Row, m, 0.0).unwrap();
            assert_eq!(g.edges(), brute_force_knn(&pts, m).as_slice(), "m = {m}");
        }
    }

    #[test]
    fn phi_zero_full_neighbourhood_is_complete() {
        let x = DataMatrix::new(array![[0.0, 1.0, 3.0], [2.0, 2.0, 1.0], [9.0, 8.0, 7.0], [1.0, 1.0, 1.0]])
            .unwrap();
        let g = build_knn_weights(&x, GraphAxis::Row, 3, 0.0).unwrap();
        assert_eq!(g, full_edge_set(4).unwrap());
        let c = build_knn_weights(&x, GraphAxis::Column, 2, 0.0).unwrap();
        assert_eq!(c, full_edge_set(3).unwrap());
    }

    #[test]
    fn column_axis_uses_column_vectors() {
        let x = DataMatrix::new(array![[0.0, 0.0, 5.0], [0.0, 1.0, 5.0]]).unwrap();
        let g = build_knn_weights(&x, GraphAxis::Column, 1, 1.0).unwrap();
        // column 2 picks column 1 (d^2 = 41 < 50)
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert!((g.weights()[0] - (-1.0f64).exp()).abs() < 1e-15);
        assert!((g.weights()[1] - (-41.0f64).exp()).abs() < 1e-30);
    }

    #[test]
    fn neighbourhood_too_large_is_rejected() {
        let x = DataMatrix::new(array![[0.0], [1.0], [2.0]]).unwrap();
        assert!(build_knn_weights(&x, GraphAxis::Row, 3, 1.0).is_err());
        assert!(build_knn_weights(&x, GraphAxis::Row, 0, 1.0).is_err());
    }

    #[test]
    fn underflowed_weights_are_dropped() {
        let x = DataMatrix::new(array![[0.0], [1.0], [1000.0]]).unwrap();
        let g = build_knn_weights(&x, GraphAxis::Row, 1, 1.0).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn full_edge_counts() {
        assert_eq!(full_edge_set(2).unwrap().len(), 1);
        assert_eq!(full_edge_set(3).unwrap().edges(), &[(0, 1), (0, 2), (1, 2)]);
        assert_eq!(full_edge_set(5).unwrap().len(), 10);
        assert!(full_edge_set(1).is_err());
        assert!(full_edge_set(5).unwrap().weights().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn single_gamma_rescaling() {
        let rows = WeightedEdgeSet::new(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let cols = WeightedEdgeSet::new(3, [(0, 1, 2.0), (0, 2, 6.0)]).unwrap();
        let (r, c) = rescale_single_gamma(&rows, &cols, 16, 4).unwrap();
        assert_eq!(r.weights(), &[0.25, 0.25]);
        assert!((c.weights()[0] - 1.0 / 16.0).abs() < 1e-15);
        assert!((c.weights()[1] - 3.0 / 16.0).abs() < 1e-15);

        let (r2, c2) = rescale_single_gamma(&r, &c, 16, 4).unwrap();
        for (a, b) in r.weights().iter().zip(r2.weights()) {
            assert!((a - b).abs() <= 1e-12 * a);
        }
        for (a, b) in c.weights().iter().zip(c2.weights()) {
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn rescaling_zero_total_is_rejected() {
        let empty = WeightedEdgeSet::empty(3);
        let cols = full_edge_set(3).unwrap();
        assert!(rescale_single_gamma(&empty, &cols, 3, 3).is_err());
        assert!(rescale_single_gamma(&cols, &empty, 3, 3).is_err());
    }

    #[test]
    fn edge_set_validation() {
        assert!(WeightedEdgeSet::new(3, [(0, 0, 1.0)]).is_err());
        assert!(WeightedEdgeSet::new(3, [(0, 3, 1.0)]).is_err());
        assert!(WeightedEdgeSet::new(3, [(0, 1, -1.0)]).is_err());
        assert!(WeightedEdgeSet::new(3, [(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        let g = WeightedEdgeSet::new(3, [(2, 0, 1.0), (1, 2, 0.0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 2)]);
    }
}
