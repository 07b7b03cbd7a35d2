//! Normalization, corruption experiments, group aggregation and rank
//! agreement for attributions.

use crate::error::{Error, Result};
use crate::feature_set::FeatureSet;
use crate::game::Attribution;
use crate::oracle::PredictionOracle;
use crate::value_fn::{marginal_prediction, GameConfig};

/// Feature indices ordered by `phi` descending, ties by ascending index.
pub fn ranking(phi: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..phi.len()).collect();
    idx.sort_by(|&a, &b| phi[b].total_cmp(&phi[a]).then(a.cmp(&b)));
    idx
}

/// 1-based ranks with ties sharing the mean of their positions; rank 1 is
/// the largest value.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let order = ranking(values);
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mid;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub attribution: Attribution,
    /// Set when no entry was positive and division by the maximum was skipped.
    pub max_skipped: bool,
}

/// Divides each entry by its group size, then by the largest positive result.
pub fn normalize(attribution: &Attribution, group_sizes: &[usize]) -> Result<Normalized> {
    let n = attribution.n_features();
    if group_sizes.len() != n {
        return Err(Error::SizeMismatch {
            what: "group sizes",
            expected: n,
            found: group_sizes.len(),
        });
    }
    if let Some(i) = group_sizes.iter().position(|&s| s == 0) {
        return Err(Error::invalid(format!("group size of feature {i} is zero")));
    }
    let mut out = attribution.clone();
    for (p, &s) in out.phi.iter_mut().zip(group_sizes) {
        *p /= s as f64;
    }
    let max = out
        .phi
        .iter()
        .copied()
        .filter(|p| *p > 0.0)
        .fold(0.0, f64::max);
    let max_skipped = max <= 0.0;
    if !max_skipped {
        for p in out.phi.iter_mut() {
            *p /= max;
        }
    }
    Ok(Normalized {
        attribution: out,
        max_skipped,
    })
}

/// Shortest prefix of the ranking whose `phi` sum reaches `coverage` of the
/// total positive `phi`, in ranking order.
pub fn coverage_prefix(attribution: &Attribution, coverage: f64) -> Result<Vec<usize>> {
    if !(coverage > 0.0 && coverage <= 1.0) {
        return Err(Error::invalid(format!(
            "coverage {coverage} must lie in (0, 1]"
        )));
    }
    let phi = &attribution.phi;
    let positive: Vec<usize> = ranking(phi)
        .into_iter()
        .filter(|&r| attribution.computed.contains(r) && phi[r] > 0.0)
        .collect();
    if positive.is_empty() {
        return Err(Error::NoPositiveAttribution);
    }
    let total: f64 = positive.iter().map(|&r| phi[r]).sum();
    let goal = coverage * total;
    let mut acc = 0.0;
    let mut prefix = Vec::new();
    for r in positive {
        acc += phi[r];
        prefix.push(r);
        if acc >= goal {
            break;
        }
    }
    Ok(prefix)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionReport {
    pub coverage_fraction: f64,
    pub corrupted_features: FeatureSet,
    /// The corrupted features in ranking order.
    pub ranked_prefix: Vec<usize>,
    pub target_class: usize,
    pub prob_before: f64,
    pub prob_after: f64,
    /// `prob_before - prob_after`.
    pub delta_prob: f64,
    /// Change in correctness (1, 0 or -1) when the instance is labelled.
    pub delta_acc: Option<f64>,
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

/// Marginalizes the coverage prefix of `attribution` out of `cfg.target` and
/// reports the drop in the probability of `target_class`.
pub fn corrupt_and_score(
    oracle: &dyn PredictionOracle,
    cfg: &GameConfig,
    attribution: &Attribution,
    coverage: f64,
    target_class: usize,
) -> Result<CorruptionReport> {
    corrupt_labelled(oracle, cfg, attribution, coverage, target_class, None)
}

fn corrupt_labelled(
    oracle: &dyn PredictionOracle,
    cfg: &GameConfig,
    attribution: &Attribution,
    coverage: f64,
    target_class: usize,
    label: Option<usize>,
) -> Result<CorruptionReport> {
    if attribution.n_features() != oracle.n_features() {
        return Err(Error::SizeMismatch {
            what: "attribution width",
            expected: oracle.n_features(),
            found: attribution.n_features(),
        });
    }
    if target_class >= oracle.n_classes() {
        return Err(Error::IndexOutOfRange {
            index: target_class,
            n: oracle.n_classes(),
        });
    }
    let ranked_prefix = coverage_prefix(attribution, coverage)?;
    let corrupted: FeatureSet = ranked_prefix.iter().copied().collect();
    let before = marginal_prediction(oracle, cfg, &FeatureSet::empty())?;
    let after = marginal_prediction(oracle, cfg, &corrupted)?;
    let delta_acc = label.map(|y| {
        let hit = |p: &[f64]| if argmax(p) == y { 1.0 } else { 0.0 };
        hit(&before) - hit(&after)
    });
    Ok(CorruptionReport {
        coverage_fraction: coverage,
        corrupted_features: corrupted,
        ranked_prefix,
        target_class,
        prob_before: before[target_class],
        prob_after: after[target_class],
        delta_prob: before[target_class] - after[target_class],
        delta_acc,
    })
}

/// One instance of a corruption study, explained by its own attribution.
#[derive(Debug, Clone)]
pub struct CorruptionCase {
    pub cfg: GameConfig,
    pub attribution: Attribution,
    pub target_class: usize,
    pub label: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionStudy {
    pub reports: Vec<CorruptionReport>,
    pub mean_delta_prob: f64,
    /// Sample standard deviation; 0 for a single instance.
    pub std_delta_prob: f64,
    /// Accuracy before minus after, when every case is labelled.
    pub delta_acc: Option<f64>,
}

pub fn corruption_study(
    oracle: &dyn PredictionOracle,
    cases: &[CorruptionCase],
    coverage: f64,
) -> Result<CorruptionStudy> {
    if cases.is_empty() {
        return Err(Error::invalid(
            "corruption study needs at least one instance",
        ));
    }
    let reports = cases
        .iter()
        .map(|c| {
            corrupt_labelled(
                oracle,
                &c.cfg,
                &c.attribution,
                coverage,
                c.target_class,
                c.label,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let k = reports.len() as f64;
    let mean = reports.iter().map(|r| r.delta_prob).sum::<f64>() / k;
    let std = if reports.len() > 1 {
        (reports
            .iter()
            .map(|r| (r.delta_prob - mean).powi(2))
            .sum::<f64>()
            / (k - 1.0))
            .sqrt()
    } else {
        0.0
    };
    let delta_acc = reports
        .iter()
        .map(|r| r.delta_acc)
        .sum::<Option<f64>>()
        .map(|s| s / k);
    Ok(CorruptionStudy {
        reports,
        mean_delta_prob: mean,
        std_delta_prob: std,
        delta_acc,
    })
}

/// Elementwise sum of attributions of several games over the same features.
pub fn aggregate_group(attributions: &[Attribution]) -> Result<Attribution> {
    let first = attributions
        .first()
        .ok_or_else(|| Error::invalid("no attributions to aggregate"))?;
    let mut out = first.clone();
    for a in &attributions[1..] {
        if a.n_features() != first.n_features() {
            return Err(Error::SizeMismatch {
                what: "aggregated attribution",
                expected: first.n_features(),
                found: a.n_features(),
            });
        }
        if a.method != first.method {
            return Err(Error::MethodMismatch(
                first.method.to_string(),
                a.method.to_string(),
            ));
        }
        if a.computed != first.computed {
            return Err(Error::invalid(
                "aggregated attributions cover different features",
            ));
        }
        for (o, p) in out.phi.iter_mut().zip(&a.phi) {
            *o += p;
        }
        out.value_calls += a.value_calls;
        out.games += a.games;
    }
    Ok(out)
}

/// Spearman correlation of the two `phi` vectors, `1 - 6Σd² / (n(n² - 1))`
/// over midranks.
pub fn spearman_rank(a: &Attribution, b: &Attribution) -> Result<f64> {
    spearman(&a.phi, &b.phi)
}

pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            what: "ranked vector",
            expected: a.len(),
            found: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::invalid(
            "rank correlation needs at least two features",
        ));
    }
    let (ra, rb) = (midranks(a), midranks(b));
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y) * (x - y)).sum();
    let n = n as f64;
    Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
}

/// One line of plot data.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub feature_id: usize,
    pub phi: f64,
    pub normalized_phi: f64,
    /// 1-based position in the ranking.
    pub rank: usize,
}

/// Rows for every computed feature, in feature order.
pub fn plot_rows(raw: &Attribution, normalized: &Attribution) -> Vec<PlotRow> {
    let mut rank = vec![0; raw.n_features()];
    let computed: Vec<f64> = raw
        .phi
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if raw.computed.contains(i) {
                *p
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    for (pos, r) in ranking(&computed).into_iter().enumerate() {
        rank[r] = pos + 1;
    }
    (0..raw.n_features())
        .filter(|&i| raw.computed.contains(i))
        .map(|i| PlotRow {
            feature_id: i,
            phi: raw.phi[i],
            normalized_phi: normalized.phi[i],
            rank: rank[i],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::{explain, full_sve, ExplainRequest, SveMethod, SveOptions};
    use crate::fixtures::{
        gaussian_dataset, or_gate_config, random_linear_softmax, random_table_game,
    };
    use crate::game::{exact_shapley_subset, Method, SumGame};
    use crate::oracle::OrGate;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn attr(phi: &[f64]) -> Attribution {
        Attribution::new(phi.to_vec(), Method::Exact, 0)
    }

    #[test]
    fn normalization_examples() {
        let n = normalize(&attr(&[0.2, 0.4]), &[1, 1]).unwrap();
        assert_eq!(n.attribution.phi, vec![0.5, 1.0]);
        assert!(!n.max_skipped);
        let n = normalize(&attr(&[0.4, 0.4]), &[2, 1]).unwrap();
        assert_eq!(n.attribution.phi, vec![0.5, 1.0]);
        let n = normalize(&attr(&[0.0, 0.0]), &[1, 1]).unwrap();
        assert_eq!(n.attribution.phi, vec![0.0, 0.0]);
        assert!(n.max_skipped);
        assert!(normalize(&attr(&[0.1]), &[0]).is_err());
        assert!(normalize(&attr(&[0.1]), &[1, 1]).is_err());
    }

    #[test]
    fn or_gate_full_corruption() {
        let cfg = or_gate_config([1.0, 1.0]);
        let a = explain(
            Arc::new(OrGate),
            cfg.clone(),
            &ExplainRequest::new(SveMethod::Full),
        )
        .unwrap();
        let rep = corrupt_and_score(&OrGate, &cfg, &a, 1.0, 1).unwrap();
        assert_eq!(rep.corrupted_features, FeatureSet::full(2));
        assert!((rep.delta_prob - 0.25).abs() < 1e-15);
        let top = corrupt_and_score(&OrGate, &cfg, &a, 1e-9, 1).unwrap();
        assert_eq!(top.ranked_prefix, vec![0]);
    }

    #[test]
    fn prefix_edge_cases() {
        assert_eq!(
            coverage_prefix(&attr(&[0.1, 0.5, -1.0, 0.4]), 0.5).unwrap(),
            vec![1]
        );
        assert_eq!(
            coverage_prefix(&attr(&[0.1, 0.5, -1.0, 0.4]), 0.6).unwrap(),
            vec![1, 3]
        );
        assert_eq!(
            coverage_prefix(&attr(&[0.3, 0.3]), 1.0).unwrap(),
            vec![0, 1]
        );
        assert!(matches!(
            coverage_prefix(&attr(&[0.0, -0.2]), 0.5),
            Err(Error::NoPositiveAttribution)
        ));
        assert!(coverage_prefix(&attr(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn top_features_hurt_more_than_random_ones() {
        let n = 6;
        let oracle = random_linear_softmax(n, 3, 1.5, 4);
        let background = Arc::new(gaussian_dataset(64, n, 5));
        let target = background.instances()[0].clone();
        let cfg = GameConfig::new(target.clone(), background);
        let a = explain(
            Arc::new(oracle.clone()),
            cfg.clone(),
            &ExplainRequest::new(SveMethod::Full),
        )
        .unwrap();
        let class = argmax(&oracle.predict(&target).unwrap());
        let rep = corrupt_and_score(&oracle, &cfg, &a, 0.5, class).unwrap();
        let k = rep.ranked_prefix.len();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut total = 0.0;
        for _ in 0..100 {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let set: FeatureSet = idx[..k].iter().copied().collect();
            let after = marginal_prediction(&oracle, &cfg, &set).unwrap();
            total += rep.prob_before - after[class];
        }
        assert!(rep.delta_prob >= total / 100.0);
    }

    #[test]
    fn study_statistics() {
        let cfg = or_gate_config([1.0, 1.0]);
        let a = explain(
            Arc::new(OrGate),
            cfg.clone(),
            &ExplainRequest::new(SveMethod::Full),
        )
        .unwrap();
        let case = CorruptionCase {
            cfg,
            attribution: a,
            target_class: 1,
            label: Some(1),
        };
        let s = corruption_study(&OrGate, &[case.clone(), case], 1.0).unwrap();
        assert!((s.mean_delta_prob - 0.25).abs() < 1e-15);
        assert_eq!(s.std_delta_prob, 0.0);
        // p(1) drops to 3/4, still the argmax
        assert_eq!(s.delta_acc, Some(0.0));
    }

    #[test]
    fn aggregation() {
        let a = attr(&[0.1, 0.3, 0.2]);
        assert_eq!(aggregate_group(std::slice::from_ref(&a)).unwrap(), a);
        let d = aggregate_group(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(d.phi, vec![0.2, 0.6, 0.4]);
        assert_eq!(d.games, 2);
        assert_eq!(ranking(&d.phi), ranking(&a.phi));
        let mut other = attr(&[0.0, 0.0, 0.0]);
        other.method = Method::Csve;
        assert!(matches!(
            aggregate_group(&[a.clone(), other]),
            Err(Error::MethodMismatch(..))
        ));
        assert!(aggregate_group(&[a, attr(&[1.0])]).is_err());
    }

    #[test]
    fn aggregation_is_additive() {
        for seed in 0..10 {
            let g = random_table_game(6, seed);
            let h = random_table_game(6, seed + 100);
            let opts = SveOptions::default();
            let sum =
                aggregate_group(&[full_sve(&g, &opts).unwrap(), full_sve(&h, &opts).unwrap()])
                    .unwrap();
            let direct = exact_shapley_subset(&SumGame { g: &g, h: &h }).unwrap();
            for r in 0..6 {
                assert!((sum.phi[r] - direct.phi[r]).abs() <= 1e-12);
            }
        }
    }

    /// Pearson correlation of the rank vectors.
    fn rank_pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn spearman_examples() {
        let up = [1.0, 2.0, 3.0, 4.0];
        let down = [4.0, 3.0, 2.0, 1.0];
        assert_eq!(spearman(&up, &up).unwrap(), 1.0);
        assert_eq!(spearman(&up, &down).unwrap(), -1.0);
        let swapped = [1.0, 3.0, 2.0, 4.0];
        let rho = spearman(&up, &swapped).unwrap();
        assert!((rho - 0.8).abs() < 1e-15);
        assert!((rho - rank_pearson(&midranks(&up), &midranks(&swapped))).abs() < 1e-12);
        assert_eq!(midranks(&[0.5, 0.9, 0.5, 0.1]), vec![2.5, 1.0, 2.5, 4.0]);
        assert!(spearman(&[1.0], &[1.0]).is_err());
        assert!(spearman(&up, &up[..3]).is_err());
    }

    #[test]
    fn plot_rows_rank_computed_features() {
        let mut a = attr(&[0.1, 0.5, 0.3]);
        a.computed = FeatureSet::from_mask(0b101);
        let rows = plot_rows(&a, &a);
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].feature_id, rows[0].rank), (0, 2));
        assert_eq!((rows[1].feature_id, rows[1].rank), (2, 1));
    }

    proptest! {
        #[test]
        fn prefixes_grow_with_coverage(
            phi in proptest::collection::vec(-1.0f64..1.0, 1..12),
            c1 in 0.01f64..1.0,
            c2 in 0.01f64..1.0,
        ) {
            prop_assume!(phi.iter().any(|p| *p > 0.0));
            let a = attr(&phi);
            let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
            let p1 = coverage_prefix(&a, lo).unwrap();
            let p2 = coverage_prefix(&a, hi).unwrap();
            prop_assert!(p1.len() <= p2.len());
            prop_assert_eq!(&p2[..p1.len()], &p1[..]);
        }

        #[test]
        fn normalization_keeps_per_size_ranking(
            pairs in proptest::collection::vec((-1.0f64..1.0, 1usize..5), 1..10),
        ) {
            let phi: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let sizes: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let per_size: Vec<f64> = pairs.iter().map(|p| p.0 / p.1 as f64).collect();
            let n = normalize(&attr(&phi), &sizes).unwrap();
            prop_assert_eq!(ranking(&n.attribution.phi), ranking(&per_size));
        }

        #[test]
        fn spearman_is_symmetric_and_bounded(
            a in proptest::collection::vec(-5i32..5, 2..15),
            seed in any::<u64>(),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let mut b = a.clone();
            b.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let ab = spearman(&a, &b).unwrap();
            prop_assert_eq!(ab, spearman(&b, &a).unwrap());
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&ab));
            let mono: Vec<f64> = a.iter().map(|x| 3.0 * x + 1.0).collect();
            let distinct = {
                let mut s = a.clone();
                s.sort_by(f64::total_cmp);
                s.windows(2).all(|w| w[0] != w[1])
            };
            if distinct {
                prop_assert_eq!(spearman(&a, &mono).unwrap(), 1.0);
            }
        }
    }
}
