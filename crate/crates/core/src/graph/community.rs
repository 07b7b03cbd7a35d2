//! Partitions of the feature set and greedy modularity maximization.

use super::{BinaryAdjacency, FeatureGraph};
use crate::error::{Error, Result};
use crate::feature_set::FeatureSet;

/// Merges stop once the best available gain drops to this value or below.
pub const MIN_MODULARITY_GAIN: f64 = 1e-12;

/// Disjoint cover of `{0..n-1}`. Communities are ordered by their smallest
/// member and labelled `0..k-1` in that order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunityPartition {
    labels: Vec<usize>,
    communities: Vec<FeatureSet>,
}

impl CommunityPartition {
    /// Any labelling is accepted; labels are renumbered canonically.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut remap = std::collections::HashMap::new();
        let mut communities: Vec<FeatureSet> = Vec::new();
        let mut canon = Vec::with_capacity(labels.len());
        for (node, &l) in labels.iter().enumerate() {
            let id = *remap.entry(l).or_insert_with(|| {
                communities.push(FeatureSet::empty());
                communities.len() - 1
            });
            communities[id].insert(node);
            canon.push(id);
        }
        Self {
            labels: canon,
            communities,
        }
    }

    /// Fails unless `communities` are non-empty, disjoint and cover `0..n`.
    pub fn from_communities(n: usize, communities: &[FeatureSet]) -> Result<Self> {
        let mut labels = vec![usize::MAX; n];
        for (c, set) in communities.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::InvalidPartition(format!("community {c} is empty")));
            }
            for i in set {
                if i >= n {
                    return Err(Error::InvalidPartition(format!(
                        "feature {i} in community {c} is outside 0..{n}"
                    )));
                }
                if labels[i] != usize::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "feature {i} belongs to communities {} and {c}",
                        labels[i]
                    )));
                }
                labels[i] = c;
            }
        }
        if let Some(i) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(Error::InvalidPartition(format!(
                "feature {i} is not covered"
            )));
        }
        Ok(Self::from_labels(&labels))
    }

    pub fn singletons(n: usize) -> Self {
        Self::from_labels(&(0..n).collect::<Vec<_>>())
    }

    pub fn single(n: usize) -> Self {
        Self::from_labels(&vec![0; n])
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.communities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.communities.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn communities(&self) -> &[FeatureSet] {
        &self.communities
    }

    pub fn community_of(&self, i: usize) -> &FeatureSet {
        &self.communities[self.labels[i]]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.communities.iter().map(FeatureSet::len).collect()
    }
}

/// Positive off-diagonal weights; negative entries count as no edge.
fn positive_weights(graph: &FeatureGraph) -> Vec<Vec<f64>> {
    let n = graph.n();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        graph.weight(i, j).max(0.0)
                    }
                })
                .collect()
        })
        .collect()
}

/// Newman modularity of `partition` on the positive part of `graph`.
/// A graph without positive weight has modularity 0.
pub fn modularity(graph: &FeatureGraph, partition: &CommunityPartition) -> Result<f64> {
    if partition.n() != graph.n() {
        return Err(Error::SizeMismatch {
            what: "partition",
            expected: graph.n(),
            found: partition.n(),
        });
    }
    let w = positive_weights(graph);
    let degree: Vec<f64> = w.iter().map(|row| row.iter().sum()).collect();
    let two_m: f64 = degree.iter().sum();
    if two_m == 0.0 {
        return Ok(0.0);
    }
    let mut q = 0.0;
    for c in partition.communities() {
        let inner: f64 = c
            .iter()
            .map(|i| c.iter().map(|j| w[i][j]).sum::<f64>())
            .sum();
        let a: f64 = c.iter().map(|i| degree[i]).sum::<f64>() / two_m;
        q += inner / two_m - a * a;
    }
    Ok(q)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    /// Surviving community id (the lower of the two).
    pub into: usize,
    pub from: usize,
    pub gain: f64,
    pub modularity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyTrace {
    pub initial_modularity: f64,
    pub merges: Vec<Merge>,
    pub modularity: f64,
}

/// Agglomerative modularity maximization starting from singletons.
///
/// At every step the pair with the largest gain `2(e_ij - a_i a_j)` is merged,
/// ties going to the lexicographically smallest pair.
pub fn greedy_modularity(graph: &FeatureGraph) -> (CommunityPartition, GreedyTrace) {
    let n = graph.n();
    let w = positive_weights(graph);
    let two_m: f64 = w.iter().flatten().sum();
    if two_m == 0.0 {
        if n > 1 {
            log::warn!("graph has no positive edge weight; every feature is its own community");
        }
        return (
            CommunityPartition::singletons(n),
            GreedyTrace {
                initial_modularity: 0.0,
                merges: Vec::new(),
                modularity: 0.0,
            },
        );
    }
    let mut e: Vec<Vec<f64>> = w
        .iter()
        .map(|row| row.iter().map(|x| x / two_m).collect())
        .collect();
    let mut a: Vec<f64> = e.iter().map(|row| row.iter().sum()).collect();
    let mut active: Vec<bool> = vec![true; n];
    let mut labels: Vec<usize> = (0..n).collect();
    let mut q: f64 = -a.iter().map(|x| x * x).sum::<f64>();
    let initial = q;
    let mut merges = Vec::new();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if !active[j] {
                    continue;
                }
                let gain = e[i][j] + e[j][i] - 2.0 * a[i] * a[j];
                if gain > best.map_or(MIN_MODULARITY_GAIN, |b| b.2) {
                    best = Some((i, j, gain));
                }
            }
        }
        let Some((i, j, gain)) = best else { break };
        let row_j = e[j].clone();
        for (x, y) in e[i].iter_mut().zip(&row_j) {
            *x += y;
        }
        for row in e.iter_mut() {
            row[i] += row[j];
        }
        a[i] += a[j];
        active[j] = false;
        for l in labels.iter_mut() {
            if *l == j {
                *l = i;
            }
        }
        q += gain;
        merges.push(Merge {
            into: i,
            from: j,
            gain,
            modularity: q,
        });
    }
    let partition = CommunityPartition::from_labels(&labels);
    let modularity = modularity(graph, &partition).expect("sizes agree");
    (
        partition,
        GreedyTrace {
            initial_modularity: initial,
            merges,
            modularity,
        },
    )
}

pub fn detect_communities(graph: &FeatureGraph) -> CommunityPartition {
    greedy_modularity(graph).0
}

pub fn detect_communities_binary(adj: &BinaryAdjacency) -> CommunityPartition {
    detect_communities(&FeatureGraph::from_adjacency(adj))
}
