//! Feature graphs: weighted adjacency, binarization and neighborhoods.
//!
//! The diagonal of a [`FeatureGraph`] is stored as 1 but never takes part in
//! thresholds, edges or modularity.

mod community;

pub use community::{
    detect_communities, detect_communities_binary, greedy_modularity, modularity,
    CommunityPartition, GreedyTrace, Merge, MIN_MODULARITY_GAIN,
};

use crate::data::BackgroundDataset;
use crate::error::{Error, Result};
use crate::feature_set::FeatureSet;

/// Symmetric matrix of finite edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGraph {
    n: usize,
    weights: Vec<f64>,
}

impl FeatureGraph {
    /// Builds a graph from a square matrix. Off-diagonal entries must be
    /// symmetric; the diagonal is reset to 1.
    pub fn from_matrix(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut weights = Vec::with_capacity(n * n);
        for row in &rows {
            if row.len() != n {
                return Err(Error::SizeMismatch {
                    what: "weight matrix row",
                    expected: n,
                    found: row.len(),
                });
            }
            weights.extend_from_slice(row);
        }
        for i in 0..n {
            for j in 0..n {
                let w = weights[i * n + j];
                if !w.is_finite() {
                    return Err(Error::invalid(format!(
                        "weight ({i},{j}) = {w} is not finite"
                    )));
                }
                if i < j && w != weights[j * n + i] {
                    return Err(Error::invalid(format!(
                        "weight matrix is not symmetric at ({i},{j}): {w} vs {}",
                        weights[j * n + i]
                    )));
                }
            }
            weights[i * n + i] = 1.0;
        }
        Ok(Self { n, weights })
    }

    /// Builds a graph from a weight function evaluated on `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            weights[i * n + i] = 1.0;
            for j in i + 1..n {
                let w = f(i, j);
                if !w.is_finite() {
                    return Err(Error::invalid(format!(
                        "weight ({i},{j}) = {w} is not finite"
                    )));
                }
                weights[i * n + j] = w;
                weights[j * n + i] = w;
            }
        }
        Ok(Self { n, weights })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.weights
            .chunks(self.n.max(1))
            .take(self.n)
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Mean of the off-diagonal weights; 0 for graphs with fewer than two nodes.
    /// Kept within the range of the weights despite rounding.
    pub fn mean_off_diagonal(&self) -> f64 {
        let n = self.n;
        if n < 2 {
            return 0.0;
        }
        let (mut total, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let w = self.weight(i, j);
                    total += w;
                    lo = lo.min(w);
                    hi = hi.max(w);
                }
            }
        }
        (total / (n * (n - 1)) as f64).clamp(lo, hi)
    }

    /// Weighted graph of a binary adjacency (0/1 weights).
    pub fn from_adjacency(adj: &BinaryAdjacency) -> Self {
        Self::from_fn(adj.n, |i, j| if adj.has_edge(i, j) { 1.0 } else { 0.0 })
            .expect("finite weights")
    }
}

/// Pearson correlation of every pair of feature columns.
///
/// Constant columns get weight 0 against every other column.
pub fn correlation_graph(dataset: &BackgroundDataset) -> Result<FeatureGraph> {
    let rows = dataset.len();
    if rows < 2 {
        return Err(Error::invalid("correlation needs at least two instances"));
    }
    let n = dataset.n_features();
    let centered: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let col = dataset.column(j);
            let mean = col.iter().sum::<f64>() / rows as f64;
            col.into_iter().map(|x| x - mean).collect()
        })
        .collect();
    let norms: Vec<f64> = centered
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    for (j, &nrm) in norms.iter().enumerate() {
        if nrm == 0.0 {
            log::warn!(
                "feature {j} ({}) has zero variance; its correlations are set to 0",
                dataset.feature_names()[j]
            );
        }
    }
    FeatureGraph::from_fn(n, |i, j| {
        if norms[i] == 0.0 || norms[j] == 0.0 {
            return 0.0;
        }
        let dot: f64 = centered[i]
            .iter()
            .zip(&centered[j])
            .map(|(a, b)| a * b)
            .sum();
        (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0)
    })
}

/// `a_ij = exp(-d_ij / 2)` with `d_ij` the Euclidean distance between centroids.
pub fn distance_graph(centroids: &[Vec<f64>]) -> Result<FeatureGraph> {
    if centroids.is_empty() {
        return Err(Error::invalid("distance graph needs at least one centroid"));
    }
    let dim = centroids[0].len();
    for c in centroids {
        if c.len() != dim {
            return Err(Error::SizeMismatch {
                what: "centroid",
                expected: dim,
                found: c.len(),
            });
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("centroid coordinates must be finite"));
        }
    }
    FeatureGraph::from_fn(centroids.len(), |i, j| {
        let d = centroids[i]
            .iter()
            .zip(&centroids[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        (-d / 2.0).exp()
    })
}

/// Element-wise mean of graphs over the same nodes.
pub fn average_graphs(graphs: &[FeatureGraph]) -> Result<FeatureGraph> {
    let first = graphs
        .first()
        .ok_or_else(|| Error::invalid("no graphs to average"))?;
    let n = first.n;
    let mut acc = vec![0.0; n * n];
    for g in graphs {
        if g.n != n {
            return Err(Error::SizeMismatch {
                what: "averaged graph",
                expected: n,
                found: g.n,
            });
        }
        for (a, w) in acc.iter_mut().zip(&g.weights) {
            *a += w;
        }
    }
    let k = graphs.len() as f64;
    FeatureGraph::from_fn(n, |i, j| acc[i * n + j] / k)
}

/// Thresholded, symmetric adjacency without self-edges.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryAdjacency {
    n: usize,
    bits: Vec<bool>,
    threshold_used: f64,
}

impl BinaryAdjacency {
    /// Builds an adjacency from a 0/1 matrix, as read from disk. The recorded
    /// threshold is 0.5.
    pub fn from_bits(rows: Vec<Vec<bool>>) -> Result<Self> {
        let n = rows.len();
        let mut bits = Vec::with_capacity(n * n);
        for row in &rows {
            if row.len() != n {
                return Err(Error::SizeMismatch {
                    what: "adjacency row",
                    expected: n,
                    found: row.len(),
                });
            }
            bits.extend_from_slice(row);
        }
        for i in 0..n {
            bits[i * n + i] = false;
            for j in i + 1..n {
                if bits[i * n + j] != bits[j * n + i] {
                    return Err(Error::invalid(format!(
                        "adjacency is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self {
            n,
            bits,
            threshold_used: 0.5,
        })
    }

    pub fn complete(n: usize) -> Self {
        let mut bits = vec![true; n * n];
        for i in 0..n {
            bits[i * n + i] = false;
        }
        Self {
            n,
            bits,
            threshold_used: f64::NEG_INFINITY,
        }
    }

    pub fn edgeless(n: usize) -> Self {
        Self {
            n,
            bits: vec![false; n * n],
            threshold_used: f64::INFINITY,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn threshold_used(&self) -> f64 {
        self.threshold_used
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    pub fn edge_count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count() / 2
    }

    pub fn rows(&self) -> Vec<Vec<bool>> {
        self.bits
            .chunks(self.n.max(1))
            .take(self.n)
            .map(<[bool]>::to_vec)
            .collect()
    }
}

/// `a_ij > threshold`, strictly. Without a threshold the mean off-diagonal
/// weight is used.
pub fn binarize(graph: &FeatureGraph, threshold: Option<f64>) -> BinaryAdjacency {
    let th = threshold.unwrap_or_else(|| graph.mean_off_diagonal());
    let n = graph.n;
    let mut bits = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            bits[i * n + j] = i != j && graph.weight(i, j) > th;
        }
    }
    BinaryAdjacency {
        n,
        bits,
        threshold_used: th,
    }
}

/// `{j : a_rj = 1} ∪ {r}`.
pub fn neighborhood(adj: &BinaryAdjacency, r: usize) -> Result<FeatureSet> {
    if r >= adj.n {
        return Err(Error::IndexOutOfRange { index: r, n: adj.n });
    }
    let mut s: FeatureSet = (0..adj.n).filter(|&j| adj.has_edge(r, j)).collect();
    s.insert(r);
    Ok(s)
}
