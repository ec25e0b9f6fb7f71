//! Synthetic data with known bicluster structure.
//!
//! * [`gen_checkerboard`]: Gaussian noise around a `K x R` grid of integer means.
//! * [`gen_compositional`]: Dirichlet-multinomial read counts where the treatment
//!   arm has the ratio between two taxon groups shrunk by a fixed fold change.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cluster::BiclusterLabels;
use crate::data::DataMatrix;
use crate::error::{Error, Result};

const LABEL_REDRAWS: usize = 100;
const SAMPLE_REDRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckerboardSpec {
    pub n: usize,
    pub p: usize,
    pub row_clusters: usize,
    pub col_clusters: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl CheckerboardSpec {
    pub fn new(n: usize, p: usize, row_clusters: usize, col_clusters: usize, sigma: f64, seed: u64) -> Self {
        Self {
            n,
            p,
            row_clusters,
            col_clusters,
            sigma,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.row_clusters == 0 || self.row_clusters > self.n {
            return Err(Error::InvalidConfig(format!(
                "row cluster count {} must lie in 1..={}",
                self.row_clusters, self.n
            )));
        }
        if self.col_clusters == 0 || self.col_clusters > self.p {
            return Err(Error::InvalidConfig(format!(
                "column cluster count {} must lie in 1..={}",
                self.col_clusters, self.p
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise sd {} must be > 0", self.sigma)));
        }
        Ok(())
    }
}

fn draw_labels(rng: &mut ChaCha8Rng, len: usize, k: usize) -> Result<Vec<usize>> {
    for _ in 0..LABEL_REDRAWS {
        let labels: Vec<usize> = (0..len).map(|_| rng.random_range(0..k)).collect();
        let mut seen = vec![false; k];
        labels.iter().for_each(|&l| seen[l] = true);
        if seen.iter().all(|&s| s) {
            return Ok(labels);
        }
    }
    Err(Error::Degenerate(format!(
        "could not realise {k} non-empty clusters over {len} items in {LABEL_REDRAWS} draws"
    )))
}

/// Checkerboard Gaussian data and its true row/column clusters.
///
/// Cluster memberships are uniform over `0..K` and `0..R` (redrawn until no
/// cluster is empty), bicluster means uniform over the integers `-10..=10`.
/// The returned labels are the generating memberships, not canonicalised.
pub fn gen_checkerboard(spec: &CheckerboardSpec) -> Result<(DataMatrix, BiclusterLabels)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rows = draw_labels(&mut rng, spec.n, spec.row_clusters)?;
    let cols = draw_labels(&mut rng, spec.p, spec.col_clusters)?;
    let means = Array2::from_shape_fn((spec.row_clusters, spec.col_clusters), |_| {
        rng.random_range(-10i32..=10) as f64
    });
    let x = Array2::from_shape_fn((spec.n, spec.p), |(i, j)| {
        let z: f64 = rng.sample(StandardNormal);
        means[[rows[i], cols[j]]] + spec.sigma * z
    });
    let truth = BiclusterLabels {
        n_row_clusters: spec.row_clusters,
        n_col_clusters: spec.col_clusters,
        row_labels: rows,
        col_labels: cols,
    };
    Ok((DataMatrix::new(x)?, truth))
}

/// Role of a taxon in the treatment manipulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaxonGroup {
    Enlarged,
    Shrunk,
    Unchanged,
}

impl TaxonGroup {
    fn label(self) -> usize {
        match self {
            TaxonGroup::Enlarged => 0,
            TaxonGroup::Unchanged => 1,
            TaxonGroup::Shrunk => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionalSpec {
    pub n_control: usize,
    pub n_treatment: usize,
    pub proportion_means: Vec<f64>,
    /// Dirichlet-multinomial overdispersion `theta`; concentration is `(1 - theta) / theta`.
    pub dispersion: f64,
    pub reads_per_sample: u64,
    pub groups: Vec<TaxonGroup>,
    pub ratio_fold_reduction: f64,
    pub seed: u64,
}

/// Linearly spread values with the given total.
fn spread(count: usize, total: f64, slope: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..count).map(|i| 1.0 + slope * i as f64).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r * total / s).collect()
}

impl CompositionalSpec {
    /// 24 taxa in ascending mean abundance: 6 rare taxa (total 0.03) to be
    /// enlarged, 13 mid-abundance taxa (total 0.10) left unchanged, and 5
    /// dominant taxa (total 0.87) to be shrunk; 50 + 50 samples of 10,000
    /// reads, dispersion 0.01, 1,400-fold ratio reduction.
    pub fn default_design(seed: u64) -> Self {
        let mut means = spread(6, 0.03, 0.06);
        means.extend(spread(13, 0.10, 0.04));
        means.extend(spread(5, 0.87, 0.25));
        let mut groups = vec![TaxonGroup::Enlarged; 6];
        groups.extend([TaxonGroup::Unchanged; 13]);
        groups.extend([TaxonGroup::Shrunk; 5]);
        Self {
            n_control: 50,
            n_treatment: 50,
            proportion_means: means,
            dispersion: 0.01,
            reads_per_sample: 10_000,
            groups,
            ratio_fold_reduction: 1400.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.proportion_means.len();
        if p < 2 || self.groups.len() != p {
            return Err(Error::InvalidConfig(format!(
                "{} proportion means for {} group labels",
                p,
                self.groups.len()
            )));
        }
        if self.proportion_means.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidConfig("proportion means must be positive".into()));
        }
        let total: f64 = self.proportion_means.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidConfig(format!("proportion means sum to {total}, not 1")));
        }
        if !(self.dispersion > 0.0 && self.dispersion < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "dispersion {} must lie in (0, 1)",
                self.dispersion
            )));
        }
        if self.reads_per_sample == 0 {
            return Err(Error::InvalidConfig("reads_per_sample must be >= 1".into()));
        }
        if !(self.ratio_fold_reduction > 0.0 && self.ratio_fold_reduction.is_finite()) {
            return Err(Error::InvalidConfig("ratio_fold_reduction must be > 0".into()));
        }
        if self.n_control + self.n_treatment < 2 {
            return Err(Error::InvalidConfig("need at least two samples".into()));
        }
        for g in [TaxonGroup::Enlarged, TaxonGroup::Shrunk] {
            if !self.groups.contains(&g) {
                return Err(Error::InvalidConfig(format!("no taxon in group {g:?}")));
            }
        }
        Ok(())
    }
}

fn dirichlet(rng: &mut ChaCha8Rng, alpha: &[f64]) -> Vec<f64> {
    loop {
        let draws: Vec<f64> = alpha
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
            .collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            return draws.into_iter().map(|d| d / total).collect();
        }
    }
}

fn multinomial(rng: &mut ChaCha8Rng, trials: u64, probs: &[f64]) -> Vec<f64> {
    let mut remaining = trials;
    let mut mass = 1.0;
    let mut out = vec![0.0; probs.len()];
    for (i, &pr) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() {
            out[i] = remaining as f64;
            break;
        }
        let q = (pr / mass).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, q).expect("valid binomial").sample(rng);
        out[i] = k as f64;
        remaining -= k;
        mass -= pr;
        if mass <= 0.0 {
            break;
        }
    }
    out
}

/// Shrinks the shrunk/enlarged count ratio by `fold`, holding the two
/// groups' combined count and the within-group proportions fixed.
///
/// Returns `None` when either group has no reads.
pub fn manipulate_counts(counts: &[f64], groups: &[TaxonGroup], fold: f64) -> Option<Vec<f64>> {
    let sum_of = |g: TaxonGroup| -> f64 {
        counts
            .iter()
            .zip(groups)
            .filter(|(_, &gg)| gg == g)
            .map(|(c, _)| c)
            .sum()
    };
    let enlarged = sum_of(TaxonGroup::Enlarged);
    let shrunk = sum_of(TaxonGroup::Shrunk);
    if enlarged <= 0.0 || shrunk <= 0.0 {
        return None;
    }
    let ratio = shrunk / enlarged / fold;
    let combined = enlarged + shrunk;
    let new_enlarged = combined / (1.0 + ratio);
    let new_shrunk = combined - new_enlarged;
    Some(
        counts
            .iter()
            .zip(groups)
            .map(|(&c, g)| match g {
                TaxonGroup::Enlarged => c * new_enlarged / enlarged,
                TaxonGroup::Shrunk => c * new_shrunk / shrunk,
                TaxonGroup::Unchanged => c,
            })
            .collect(),
    )
}

fn normalize(counts: &[f64]) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    counts.iter().map(|c| c / total).collect()
}

/// Relative abundances for control then treatment samples, with truth labels
/// (2 sample clusters by arm, taxon clusters by manipulation group).
///
/// Each sample uses its own random substream of `spec.seed`.
pub fn gen_compositional(spec: &CompositionalSpec) -> Result<(DataMatrix, BiclusterLabels)> {
    spec.validate()?;
    let p = spec.proportion_means.len();
    let n = spec.n_control + spec.n_treatment;
    let concentration = (1.0 - spec.dispersion) / spec.dispersion;
    let alpha: Vec<f64> = spec.proportion_means.iter().map(|m| m * concentration).collect();

    let mut x = Array2::zeros((n, p));
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        let treated = i >= spec.n_control;
        let mut row = None;
        for _ in 0..SAMPLE_REDRAWS {
            let probs = dirichlet(&mut rng, &alpha);
            let counts = multinomial(&mut rng, spec.reads_per_sample, &probs);
            if !treated {
                row = Some(normalize(&counts));
                break;
            }
            if let Some(m) = manipulate_counts(&counts, &spec.groups, spec.ratio_fold_reduction) {
                row = Some(normalize(&m));
                break;
            }
        }
        let row = row.ok_or_else(|| {
            Error::Degenerate(format!("sample {i}: manipulated groups stayed empty"))
        })?;
        x.row_mut(i).assign(&ndarray::Array1::from(row));
    }

    let row_labels: Vec<usize> = (0..n).map(|i| usize::from(i >= spec.n_control)).collect();
    let col_labels: Vec<usize> = spec.groups.iter().map(|g| g.label()).collect();
    Ok((DataMatrix::new(x)?, BiclusterLabels::new(&row_labels, &col_labels)))
}
