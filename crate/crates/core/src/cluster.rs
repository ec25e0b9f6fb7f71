//! Cluster labels from a fitted state, and partition agreement scores.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::admm::FitResult;
use crate::error::{Error, Result};
use crate::weights::WeightedEdgeSet;

/// Default relative fusion tolerance for [`extract_labels`].
pub const DEFAULT_FUSION_EPS: f64 = 1e-6;

/// Row and column partitions, labels 0-based in first-occurrence order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiclusterLabels {
    pub row_labels: Vec<usize>,
    pub col_labels: Vec<usize>,
    pub n_row_clusters: usize,
    pub n_col_clusters: usize,
}

impl BiclusterLabels {
    /// Canonicalises arbitrary integer assignments.
    pub fn new(row_labels: &[usize], col_labels: &[usize]) -> Self {
        let (row_labels, n_row_clusters) = canonicalize(row_labels);
        let (col_labels, n_col_clusters) = canonicalize(col_labels);
        Self {
            row_labels,
            col_labels,
            n_row_clusters,
            n_col_clusters,
        }
    }

    /// One label per matrix cell, row-major: `row_label * n_col_clusters + col_label`.
    pub fn product_labels(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.row_labels.len() * self.col_labels.len());
        for &r in &self.row_labels {
            for &c in &self.col_labels {
                out.push(r * self.n_col_clusters + c);
            }
        }
        out
    }
}

/// Relabels so labels are `0..k` in order of first appearance.
pub fn canonicalize(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect();
    (out, map.len())
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // lower root wins; keeps results independent of edge order
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }

    fn labels(mut self) -> Vec<usize> {
        let n = self.parent.len();
        let roots: Vec<usize> = (0..n).map(|i| self.find(i)).collect();
        canonicalize(&roots).0
    }
}

fn fused_components(edges: &WeightedEdgeSet, split: &Array2<f64>, threshold: f64) -> Vec<usize> {
    let mut uf = UnionFind::new(edges.dimension());
    for (row, &(a, b)) in split.outer_iter().zip(edges.edges()) {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= threshold {
            uf.union(a, b);
        }
    }
    uf.labels()
}

/// Connected components of the fused row and column graphs.
///
/// An edge counts as fused when its splitting vector has Euclidean norm at most
/// `eps * max(1, ||A||_F / sqrt(n p))`.
pub fn extract_labels(
    result: &FitResult,
    rows: &WeightedEdgeSet,
    cols: &WeightedEdgeSet,
    eps: f64,
) -> Result<BiclusterLabels> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidInput(format!("fusion tolerance {eps} must be >= 0")));
    }
    let a = result.a_hat();
    let (n, p) = a.dim();
    if rows.dimension() != n
        || cols.dimension() != p
        || result.v_final().nrows() != rows.len()
        || result.z_final().nrows() != cols.len()
    {
        return Err(Error::DimensionMismatch(
            "edge sets do not match the fitted state".into(),
        ));
    }
    let rms = (a.iter().map(|x| x * x).sum::<f64>() / (n * p) as f64).sqrt();
    let threshold = eps * rms.max(1.0);
    let row_labels = fused_components(rows, result.v_final(), threshold);
    let col_labels = fused_components(cols, result.z_final(), threshold);
    Ok(BiclusterLabels::new(&row_labels, &col_labels))
}

fn choose2(k: u64) -> f64 {
    (k * k.saturating_sub(1) / 2) as f64
}

/// Hubert-Arabie adjusted Rand index. Returns 1 when the partitions are
/// identical and the index is otherwise undefined (zero denominator).
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "label vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InvalidInput("ARI needs at least 2 items".into()));
    }
    let (ca, ka) = canonicalize(a);
    let (cb, kb) = canonicalize(b);
    let mut table = vec![0u64; ka * kb];
    let mut row_tot = vec![0u64; ka];
    let mut col_tot = vec![0u64; kb];
    for (&i, &j) in ca.iter().zip(&cb) {
        table[i * kb + j] += 1;
        row_tot[i] += 1;
        col_tot[j] += 1;
    }
    let index: f64 = table.iter().map(|&c| choose2(c)).sum();
    let sum_a: f64 = row_tot.iter().map(|&c| choose2(c)).sum();
    let sum_b: f64 = col_tot.iter().map(|&c| choose2(c)).sum();
    let total = choose2(a.len() as u64);
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(if ca == cb { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

/// ARI of rows, of columns, and of the cell-level bicluster labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiclusterAgreement {
    pub rows: f64,
    pub cols: f64,
    pub product: f64,
}

pub fn bicluster_agreement(est: &BiclusterLabels, truth: &BiclusterLabels) -> Result<BiclusterAgreement> {
    Ok(BiclusterAgreement {
        rows: adjusted_rand_index(&est.row_labels, &truth.row_labels)?,
        cols: adjusted_rand_index(&est.col_labels, &truth.col_labels)?,
        product: adjusted_rand_index(&est.product_labels(), &truth.product_labels())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admm::{AdmmState, FitResult};
    use crate::weights::full_edge_set;
    use ndarray::Array1;

    /// Rand-style pair counting over all C(n, 2) pairs.
    fn brute_force_ari(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let (mut both, mut only_a, mut only_b, mut neither) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                match (a[i] == a[j], b[i] == b[j]) {
                    (true, true) => both += 1.0,
                    (true, false) => only_a += 1.0,
                    (false, true) => only_b += 1.0,
                    (false, false) => neither += 1.0,
                }
            }
        }
        let pairs = both + only_a + only_b + neither;
        let same_a = both + only_a;
        let same_b = both + only_b;
        let expected = same_a * same_b / pairs;
        (both - expected) / (0.5 * (same_a + same_b) - expected)
    }

    fn fit_result(a: Array2<f64>, v: Array2<f64>, z: Array2<f64>) -> FitResult {
        let n = a.nrows();
        FitResult {
            state: AdmmState {
                lambda1: Array2::zeros(v.dim()),
                lambda2: Array2::zeros(z.dim()),
                lambda3: Array1::zeros(n),
                a,
                v,
                z,
                iter: 1,
            },
            iterations: 1,
            primal_residual: 0.0,
            dual_residual: 0.0,
            objective: 0.0,
            converged: true,
            gamma1: 0.0,
            gamma2: 0.0,
        }
    }

    #[test]
    fn identical_partitions_score_one() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 2], &[5, 5, 3, 9]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[0, 0, 0], &[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
    }

    #[test]
    fn singletons_versus_one_cluster() {
        // sum_ij C(n_ij, 2) = 0, sum_i C(a_i, 2) = 0, sum_j C(b_j, 2) = 6
        // expected = 0, max = 3 -> (0 - 0) / (3 - 0) = 0
        assert_eq!(adjusted_rand_index(&[0, 1, 2, 3], &[0, 0, 0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn small_example_matches_pair_counting() {
        let a = [0, 0, 1, 1];
        let b = [0, 0, 0, 1];
        let got = adjusted_rand_index(&a, &b).unwrap();
        assert!((got - brute_force_ari(&a, &b)).abs() < 1e-15);
        // frozen value from the pair count: both = 1, same_a = 2, same_b = 3 over 6 pairs
        assert!((got - 0.0).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(adjusted_rand_index(&[0, 1], &[0, 1, 2]).is_err());
        assert!(adjusted_rand_index(&[0], &[0]).is_err());
    }

    #[test]
    fn all_rows_fused() {
        let a = Array2::ones((3, 2));
        let rows = full_edge_set(3).unwrap();
        let cols = full_edge_set(2).unwrap();
        let r = fit_result(a, Array2::zeros((3, 2)), Array2::from_elem((1, 3), 0.5));
        let labels = extract_labels(&r, &rows, &cols, 1e-6).unwrap();
        assert_eq!(labels.n_row_clusters, 1);
        assert_eq!(labels.col_labels, vec![0, 1]);
    }

    #[test]
    fn chain_of_fused_edges_is_transitive() {
        let rows = WeightedEdgeSet::new(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let cols = WeightedEdgeSet::new(2, [(0, 1, 1.0)]).unwrap();
        let mut v = Array2::zeros((3, 2));
        v[[2, 0]] = 1.0;
        let r = fit_result(Array2::zeros((4, 2)), v, Array2::zeros((1, 4)));
        let labels = extract_labels(&r, &rows, &cols, 1e-6).unwrap();
        assert_eq!(labels.row_labels, vec![0, 0, 0, 1]);
        assert_eq!(labels.n_col_clusters, 1);
    }

    #[test]
    fn product_labels_layout() {
        let l = BiclusterLabels::new(&[3, 3, 7], &[1, 0]);
        assert_eq!(l.product_labels(), vec![0, 1, 0, 1, 2, 3]);
    }
}
