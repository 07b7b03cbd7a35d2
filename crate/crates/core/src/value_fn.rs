//! Turns a classifier and a target instance into a cooperative game.
//!
//! Corrupted features are marginalized by substituting background instances
//! and averaging the classifier's probability vectors. The value of a
//! coalition `S` is the expected log-probability gap between predicting from
//! the reference input and predicting with `S` corrupted, with the expectation
//! taken under the reference posterior.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::data::{compose, BackgroundDataset, Instance};
use crate::error::{Error, Result};
use crate::feature_set::FeatureSet;
use crate::game::CoalitionGame;
use crate::keyed;
use crate::oracle::PredictionOracle;

/// How many background draws marginalize one corrupted set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalSamples {
    /// Every background instance, in dataset order.
    All,
    /// A seeded draw; without replacement when it fits the dataset.
    Count(usize),
}

#[derive(Debug, Clone)]
pub struct GameConfig {
    pub target: Instance,
    pub background: Arc<BackgroundDataset>,
    pub marginal_samples: MarginalSamples,
    pub log_base: f64,
    pub prob_floor: f64,
    /// Community for the restricted value function; features outside it are
    /// always marginalized.
    pub restrict_to: Option<FeatureSet>,
    pub seed: u64,
    /// Instances per oracle call.
    pub batch_size: usize,
}

impl GameConfig {
    pub fn new(target: Instance, background: Arc<BackgroundDataset>) -> Self {
        Self {
            target,
            background,
            marginal_samples: MarginalSamples::All,
            log_base: 2.0,
            prob_floor: 1e-12,
            restrict_to: None,
            seed: 0,
            batch_size: 256,
        }
    }

    pub fn n_features(&self) -> usize {
        self.target.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.background.n_features() != self.target.len() {
            return Err(Error::SizeMismatch {
                what: "background width",
                expected: self.target.len(),
                found: self.background.n_features(),
            });
        }
        if !(self.prob_floor > 0.0 && self.prob_floor < 0.5) {
            return Err(Error::invalid(format!(
                "probability floor {} must lie in (0, 0.5)",
                self.prob_floor
            )));
        }
        if !(self.log_base > 0.0 && self.log_base.is_finite() && self.log_base != 1.0) {
            return Err(Error::invalid(format!(
                "invalid log base {}",
                self.log_base
            )));
        }
        if self.marginal_samples == MarginalSamples::Count(0) {
            return Err(Error::invalid("marginal_samples must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if let Some(r) = &self.restrict_to {
            if r.bound() > self.n_features() {
                return Err(Error::IndexOutOfRange {
                    index: r.bound() - 1,
                    n: self.n_features(),
                });
            }
        }
        Ok(())
    }

    /// Features that are corrupted in every coalition of the game.
    fn baseline_corrupted(&self) -> FeatureSet {
        match &self.restrict_to {
            Some(a) => a.complement(self.n_features()),
            None => FeatureSet::empty(),
        }
    }

    fn check_oracle(&self, oracle: &dyn PredictionOracle) -> Result<()> {
        if oracle.n_features() != self.n_features() {
            return Err(Error::SizeMismatch {
                what: "oracle width",
                expected: self.n_features(),
                found: oracle.n_features(),
            });
        }
        Ok(())
    }
}

/// Background indices used to marginalize `corrupted`, in ascending order.
fn draw_indices(cfg: &GameConfig, corrupted: &FeatureSet) -> Vec<usize> {
    let b = cfg.background.len();
    match cfg.marginal_samples {
        MarginalSamples::All => (0..b).collect(),
        MarginalSamples::Count(k) => {
            let mut key = vec![keyed::tag::MARGINAL];
            key.extend_from_slice(corrupted.words());
            let mut rng = keyed::rng(cfg.seed, &key);
            let mut idx = if k <= b {
                index::sample(&mut rng, b, k).into_vec()
            } else {
                (0..k).map(|_| rng.random_range(0..b)).collect()
            };
            idx.sort_unstable();
            idx
        }
    }
}

fn corrupted_instances(cfg: &GameConfig, corrupted: &FeatureSet, draws: &[usize]) -> Vec<Instance> {
    let keep = corrupted.complement(cfg.n_features());
    let bg = cfg.background.instances();
    draws
        .iter()
        .map(|&i| compose(&cfg.target, &bg[i], &keep).expect("widths validated"))
        .collect()
}

fn predict_chunked(
    oracle: &dyn PredictionOracle,
    instances: &[Instance],
    batch_size: usize,
) -> Result<Vec<Vec<f64>>> {
    let chunks: Vec<&[Instance]> = instances.chunks(batch_size).collect();
    let parts: Vec<Vec<Vec<f64>>> = if oracle.concurrent_safe() {
        chunks
            .into_par_iter()
            .map(|c| oracle.predict_batch(c))
            .collect::<Result<_>>()?
    } else {
        chunks
            .into_iter()
            .map(|c| oracle.predict_batch(c))
            .collect::<Result<_>>()?
    };
    Ok(parts.into_iter().flatten().collect())
}

fn mean_probs(preds: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = vec![0.0; preds[0].len()];
    for p in preds {
        for (a, x) in acc.iter_mut().zip(p) {
            *a += x;
        }
    }
    let n = preds.len() as f64;
    acc.into_iter().map(|a| a / n).collect()
}

/// Class probabilities with `corrupted` marginalized out over background draws.
pub fn marginal_prediction(
    oracle: &dyn PredictionOracle,
    cfg: &GameConfig,
    corrupted: &FeatureSet,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    cfg.check_oracle(oracle)?;
    if corrupted.bound() > cfg.n_features() {
        return Err(Error::IndexOutOfRange {
            index: corrupted.bound() - 1,
            n: cfg.n_features(),
        });
    }
    marginal_unchecked(oracle, cfg, corrupted)
}

fn marginal_unchecked(
    oracle: &dyn PredictionOracle,
    cfg: &GameConfig,
    corrupted: &FeatureSet,
) -> Result<Vec<f64>> {
    if corrupted.is_empty() {
        return oracle.predict(&cfg.target);
    }
    let draws = draw_indices(cfg, corrupted);
    let preds = predict_chunked(
        oracle,
        &corrupted_instances(cfg, corrupted, &draws),
        cfg.batch_size,
    )?;
    Ok(mean_probs(&preds))
}

/// Expected log-loss gap `Σ_y ref(y) [log ref(y) - log cmp(y)]`, both sides
/// clamped to `[floor, 1]`.
pub fn log_gap(reference: &[f64], compare: &[f64], floor: f64, log_base: f64) -> f64 {
    let ln_base = log_base.ln();
    reference
        .iter()
        .zip(compare)
        .filter(|(r, _)| **r > 0.0)
        .map(|(r, c)| r * (r.clamp(floor, 1.0).ln() - c.clamp(floor, 1.0).ln()))
        .sum::<f64>()
        / ln_base
}

/// Importance score of the coalition `s`.
pub fn importance_score(
    oracle: &dyn PredictionOracle,
    cfg: &GameConfig,
    s: &FeatureSet,
) -> Result<f64> {
    cfg.validate()?;
    cfg.check_oracle(oracle)?;
    if let Some(a) = &cfg.restrict_to {
        if !s.is_subset(a) {
            return Err(Error::invalid(format!(
                "coalition {s} is not inside community {a}"
            )));
        }
    }
    if s.is_empty() {
        return Ok(0.0);
    }
    let base = cfg.baseline_corrupted();
    let reference = marginal_unchecked(oracle, cfg, &base)?;
    let compare = marginal_unchecked(oracle, cfg, &base.union(s))?;
    Ok(log_gap(&reference, &compare, cfg.prob_floor, cfg.log_base))
}

#[derive(Clone)]
struct CachedMarginal {
    probs: Arc<Vec<f64>>,
    draws: usize,
}

/// Shared cache of marginal predictions for one target instance.
///
/// Restricted games for different communities of the same instance reuse
/// each other's marginals through this cache.
pub struct Marginalizer {
    oracle: Arc<dyn PredictionOracle>,
    cfg: GameConfig,
    cache: Mutex<HashMap<FeatureSet, CachedMarginal>>,
}

/// Upper bound on instances materialized at once while prefetching.
const PREFETCH_BLOCK: usize = 1 << 16;

impl Marginalizer {
    pub fn new(oracle: Arc<dyn PredictionOracle>, cfg: GameConfig) -> Result<Self> {
        cfg.validate()?;
        cfg.check_oracle(oracle.as_ref())?;
        Ok(Self {
            oracle,
            cfg,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &GameConfig {
        &self.cfg
    }

    pub fn oracle(&self) -> &Arc<dyn PredictionOracle> {
        &self.oracle
    }

    fn cached(&self, corrupted: &FeatureSet) -> Option<Arc<Vec<f64>>> {
        self.cache
            .lock()
            .expect("marginal cache poisoned")
            .get(corrupted)
            .map(|c| c.probs.clone())
    }

    fn store(&self, corrupted: FeatureSet, probs: Vec<f64>, draws: usize) -> Arc<Vec<f64>> {
        let probs = Arc::new(probs);
        self.cache
            .lock()
            .expect("marginal cache poisoned")
            .entry(corrupted)
            .or_insert(CachedMarginal { probs, draws })
            .probs
            .clone()
    }

    pub fn marginal(&self, corrupted: &FeatureSet) -> Result<Arc<Vec<f64>>> {
        if let Some(p) = self.cached(corrupted) {
            return Ok(p);
        }
        let probs = marginal_unchecked(self.oracle.as_ref(), &self.cfg, corrupted)?;
        let draws = if corrupted.is_empty() {
            1
        } else {
            draw_indices(&self.cfg, corrupted).len()
        };
        Ok(self.store(corrupted.clone(), probs, draws))
    }

    /// Computes the marginals of every uncached set, packing instances from
    /// many sets into shared oracle batches.
    pub fn prefetch(&self, sets: &[FeatureSet]) -> Result<()> {
        let pending: Vec<&FeatureSet> = {
            let cache = self.cache.lock().expect("marginal cache poisoned");
            let mut seen = std::collections::HashSet::new();
            sets.iter()
                .filter(|s| !cache.contains_key(*s) && seen.insert(*s))
                .collect()
        };
        let mut start = 0;
        while start < pending.len() {
            let mut end = start;
            let mut plans = Vec::new();
            let mut total = 0;
            while end < pending.len() && (total < PREFETCH_BLOCK || plans.is_empty()) {
                let s = pending[end];
                let draws = if s.is_empty() {
                    Vec::new()
                } else {
                    draw_indices(&self.cfg, s)
                };
                total += draws.len().max(1);
                plans.push(draws);
                end += 1;
            }
            let mut instances = Vec::with_capacity(total);
            for (s, draws) in pending[start..end].iter().zip(&plans) {
                if s.is_empty() {
                    instances.push(self.cfg.target.clone());
                } else {
                    instances.extend(corrupted_instances(&self.cfg, s, draws));
                }
            }
            let preds = predict_chunked(self.oracle.as_ref(), &instances, self.cfg.batch_size)?;
            let mut offset = 0;
            for (s, draws) in pending[start..end].iter().zip(&plans) {
                let count = draws.len().max(1);
                let probs = mean_probs(&preds[offset..offset + count]);
                offset += count;
                self.store((*s).clone(), probs, count);
            }
            start = end;
        }
        Ok(())
    }

    /// Distinct corrupted sets marginalized so far.
    pub fn cached_sets(&self) -> usize {
        self.cache.lock().expect("marginal cache poisoned").len()
    }

    /// Oracle predictions spent on cached marginals.
    pub fn predictions(&self) -> u64 {
        self.cache
            .lock()
            .expect("marginal cache poisoned")
            .values()
            .map(|c| c.draws as u64)
            .sum()
    }
}

/// The importance-score game of one target instance, memoized.
pub struct OracleGame {
    marginalizer: Arc<Marginalizer>,
    restrict_to: Option<FeatureSet>,
    baseline: FeatureSet,
    reference: Arc<Vec<f64>>,
    memo: Mutex<HashMap<FeatureSet, f64>>,
}

impl OracleGame {
    /// Game over all features, or over `restrict_to` with everything outside
    /// it marginalized.
    pub fn new(marginalizer: Arc<Marginalizer>, restrict_to: Option<FeatureSet>) -> Result<Self> {
        let n = marginalizer.cfg.n_features();
        if let Some(a) = &restrict_to {
            if a.bound() > n {
                return Err(Error::IndexOutOfRange {
                    index: a.bound() - 1,
                    n,
                });
            }
        }
        let baseline = match &restrict_to {
            Some(a) => a.complement(n),
            None => FeatureSet::empty(),
        };
        let reference = marginalizer.marginal(&baseline)?;
        Ok(Self {
            marginalizer,
            restrict_to,
            baseline,
            reference,
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn marginalizer(&self) -> &Arc<Marginalizer> {
        &self.marginalizer
    }

    pub fn restrict_to(&self) -> Option<&FeatureSet> {
        self.restrict_to.as_ref()
    }

    /// Features that are always marginalized in this game.
    pub fn baseline(&self) -> &FeatureSet {
        &self.baseline
    }

    /// The posterior the expectation over labels is taken under.
    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    /// Distinct coalitions evaluated.
    pub fn evaluations(&self) -> u64 {
        self.memo.lock().expect("memo poisoned").len() as u64
    }

    /// Prefetches the marginals needed for the given coalitions.
    pub fn prefetch(&self, coalitions: &[FeatureSet]) -> Result<()> {
        let sets: Vec<FeatureSet> = coalitions
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| self.baseline.union(s))
            .collect();
        self.marginalizer.prefetch(&sets)
    }

    /// `Σ_y ref(y) log p(y | z)` for a fully specified instance `z`.
    pub(crate) fn instance_scores(&self, batch: &[Instance]) -> Result<Vec<f64>> {
        let cfg = &self.marginalizer.cfg;
        let ln_base = cfg.log_base.ln();
        let preds = self.marginalizer.oracle.predict_batch(batch)?;
        Ok(preds
            .iter()
            .map(|p| {
                self.reference
                    .iter()
                    .zip(p)
                    .filter(|(r, _)| **r > 0.0)
                    .map(|(r, q)| r * q.clamp(cfg.prob_floor, 1.0).ln())
                    .sum::<f64>()
                    / ln_base
            })
            .collect())
    }
}

impl CoalitionGame for OracleGame {
    fn n_players(&self) -> usize {
        self.marginalizer.cfg.n_features()
    }

    fn value(&self, coalition: &FeatureSet) -> Result<f64> {
        if coalition.is_empty() {
            return Ok(0.0);
        }
        if let Some(a) = &self.restrict_to {
            if !coalition.is_subset(a) {
                return Err(Error::invalid(format!(
                    "coalition {coalition} is not inside community {a}"
                )));
            }
        }
        if let Some(&v) = self.memo.lock().expect("memo poisoned").get(coalition) {
            return Ok(v);
        }
        let cfg = &self.marginalizer.cfg;
        let compare = self
            .marginalizer
            .marginal(&self.baseline.union(coalition))?;
        let v = log_gap(&self.reference, &compare, cfg.prob_floor, cfg.log_base);
        self.memo
            .lock()
            .expect("memo poisoned")
            .insert(coalition.clone(), v);
        Ok(v)
    }
}

/// Builds the memoized game for `cfg`, honoring `cfg.restrict_to`.
pub fn as_game(oracle: Arc<dyn PredictionOracle>, cfg: GameConfig) -> Result<OracleGame> {
    let restrict = cfg.restrict_to.clone();
    let m = Arc::new(Marginalizer::new(oracle, cfg)?);
    OracleGame::new(m, restrict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{LinearSoftmax, OrGate, OracleKind};

    fn or_domain() -> Arc<BackgroundDataset> {
        Arc::new(
            BackgroundDataset::from_rows(vec![
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0],
            ])
            .unwrap(),
        )
    }

    fn or_cfg() -> GameConfig {
        GameConfig::new(Instance::new(vec![1.0, 1.0]).unwrap(), or_domain())
    }

    #[test]
    fn or_gate_marginals() {
        let cfg = or_cfg();
        let p = marginal_prediction(&OrGate, &cfg, &FeatureSet::empty()).unwrap();
        assert_eq!(p, vec![0.0, 1.0]);
        let p = marginal_prediction(&OrGate, &cfg, &FeatureSet::full(2)).unwrap();
        assert_eq!(p[1], 0.75);
        let p = marginal_prediction(&OrGate, &cfg, &FeatureSet::singleton(0)).unwrap();
        assert_eq!(p[1], 1.0);
    }

    #[test]
    fn or_gate_importance_scores() {
        let cfg = or_cfg();
        let v12 = importance_score(&OrGate, &cfg, &FeatureSet::full(2)).unwrap();
        assert!((v12 - (4.0f64 / 3.0).log2()).abs() <= 1e-15);
        assert!((v12 - 0.41504).abs() < 1e-5);
        assert_eq!(
            importance_score(&OrGate, &cfg, &FeatureSet::singleton(0)).unwrap(),
            0.0
        );
        assert_eq!(
            importance_score(&OrGate, &cfg, &FeatureSet::singleton(1)).unwrap(),
            0.0
        );
        assert_eq!(
            importance_score(&OrGate, &cfg, &FeatureSet::empty()).unwrap(),
            0.0
        );
    }

    #[test]
    fn game_reproduces_scores() {
        let g = as_game(Arc::new(OrGate), or_cfg()).unwrap();
        assert_eq!(g.value(&FeatureSet::empty()).unwrap(), 0.0);
        assert_eq!(g.value(&FeatureSet::singleton(1)).unwrap(), 0.0);
        assert!((g.value(&FeatureSet::full(2)).unwrap() - (4.0f64 / 3.0).log2()).abs() < 1e-15);
        assert_eq!(g.evaluations(), 2);
    }

    #[test]
    fn constant_oracle_gives_null_game() {
        let bg = Arc::new(
            BackgroundDataset::from_rows(
                (0..5).map(|i| vec![i as f64, -(i as f64), 0.5]).collect(),
            )
            .unwrap(),
        );
        let cfg = GameConfig::new(Instance::new(vec![1.0, 2.0, 3.0]).unwrap(), bg);
        let g = as_game(Arc::new(LinearSoftmax::zeros(3, 4)), cfg).unwrap();
        for m in 0..8u64 {
            assert_eq!(g.value(&FeatureSet::from_mask(m)).unwrap(), 0.0);
        }
    }

    fn linear_setup() -> (Arc<dyn PredictionOracle>, GameConfig) {
        let oracle = LinearSoftmax::new(
            vec![
                vec![0.8, -0.4, 1.3, 0.2],
                vec![-0.5, 0.9, 0.1, -1.1],
                vec![0.0, 0.0, 0.0, 0.0],
            ],
            vec![0.1, -0.2, 0.0],
        )
        .unwrap();
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                (0..4)
                    .map(|j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0)
                    .collect()
            })
            .collect();
        let bg = Arc::new(BackgroundDataset::from_rows(rows).unwrap());
        let cfg = GameConfig::new(Instance::new(vec![1.2, -0.3, 0.7, 2.0]).unwrap(), bg);
        (Arc::new(oracle), cfg)
    }

    #[test]
    fn full_sample_without_replacement_equals_exhaustive() {
        let (oracle, cfg) = linear_setup();
        let mut sampled = cfg.clone();
        sampled.marginal_samples = MarginalSamples::Count(cfg.background.len());
        sampled.seed = 99;
        let a = as_game(oracle.clone(), cfg).unwrap();
        let b = as_game(oracle, sampled).unwrap();
        for m in 0..16u64 {
            let s = FeatureSet::from_mask(m);
            assert_eq!(a.value(&s).unwrap(), b.value(&s).unwrap());
        }
    }

    #[test]
    fn sampling_is_keyed_by_seed_and_subset() {
        let (oracle, mut cfg) = linear_setup();
        cfg.marginal_samples = MarginalSamples::Count(5);
        cfg.seed = 7;
        let a = as_game(oracle.clone(), cfg.clone()).unwrap();
        let b = as_game(oracle.clone(), cfg.clone()).unwrap();
        // reversed evaluation order
        for m in 0..16u64 {
            a.value(&FeatureSet::from_mask(m)).unwrap();
        }
        for m in (0..16u64).rev() {
            b.value(&FeatureSet::from_mask(m)).unwrap();
        }
        for m in 0..16u64 {
            let s = FeatureSet::from_mask(m);
            assert_eq!(
                a.value(&s).unwrap().to_bits(),
                b.value(&s).unwrap().to_bits()
            );
        }
        // more draws than background rows switches to replacement
        cfg.marginal_samples = MarginalSamples::Count(40);
        let idx = draw_indices(&cfg, &FeatureSet::full(4));
        assert_eq!(idx.len(), 40);
        assert!(idx.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn marginals_are_distributions() {
        let (oracle, cfg) = linear_setup();
        for m in 0..16u64 {
            let p = marginal_prediction(oracle.as_ref(), &cfg, &FeatureSet::from_mask(m)).unwrap();
            assert!(p.iter().all(|x| *x >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn prefetch_matches_lazy_evaluation() {
        let (oracle, mut cfg) = linear_setup();
        cfg.batch_size = 5;
        let lazy = as_game(oracle.clone(), cfg.clone()).unwrap();
        let eager = as_game(oracle, cfg).unwrap();
        let sets: Vec<FeatureSet> = (0..16u64).map(FeatureSet::from_mask).collect();
        eager.prefetch(&sets).unwrap();
        for s in &sets {
            assert_eq!(
                lazy.value(s).unwrap().to_bits(),
                eager.value(s).unwrap().to_bits()
            );
        }
        assert_eq!(
            lazy.marginalizer().predictions(),
            eager.marginalizer().predictions()
        );
    }

    #[test]
    fn restricted_game_marginalizes_outside_community() {
        let (oracle, cfg) = linear_setup();
        let a: FeatureSet = [0, 2].into_iter().collect();
        let mut rcfg = cfg.clone();
        rcfg.restrict_to = Some(a.clone());
        let g = as_game(oracle.clone(), rcfg.clone()).unwrap();
        let outside = a.complement(4);
        let reference = marginal_prediction(oracle.as_ref(), &cfg, &outside).unwrap();
        let compare = marginal_prediction(oracle.as_ref(), &cfg, &outside.with(2)).unwrap();
        let expect = log_gap(&reference, &compare, 1e-12, 2.0);
        assert_eq!(g.value(&FeatureSet::singleton(2)).unwrap(), expect);
        assert_eq!(
            importance_score(oracle.as_ref(), &rcfg, &FeatureSet::singleton(2)).unwrap(),
            expect
        );
        assert!(g.value(&FeatureSet::singleton(1)).is_err());
    }

    struct Saturated;

    impl PredictionOracle for Saturated {
        fn n_features(&self) -> usize {
            1
        }
        fn n_classes(&self) -> usize {
            2
        }
        fn kind(&self) -> OracleKind {
            OracleKind::LookupTable
        }
        fn predict_raw(&self, batch: &[Instance]) -> Result<Vec<Vec<f64>>> {
            Ok(batch
                .iter()
                .map(|x| {
                    if x[0] > 0.0 {
                        vec![0.0, 1.0]
                    } else {
                        vec![1.0, 0.0]
                    }
                })
                .collect())
        }
    }

    #[test]
    fn clamping_keeps_hard_probabilities_finite() {
        let bg = Arc::new(BackgroundDataset::from_rows(vec![vec![0.0]]).unwrap());
        let cfg = GameConfig::new(Instance::new(vec![1.0]).unwrap(), bg);
        let v = importance_score(&Saturated, &cfg, &FeatureSet::singleton(0)).unwrap();
        assert!(v.is_finite());
        assert!((v - (-(1e-12f64).log2())).abs() < 1e-9);
    }

    #[test]
    fn config_validation() {
        let mut cfg = or_cfg();
        cfg.prob_floor = 0.5;
        assert!(cfg.validate().is_err());
        let mut cfg = or_cfg();
        cfg.log_base = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = or_cfg();
        cfg.marginal_samples = MarginalSamples::Count(0);
        assert!(cfg.validate().is_err());
        let cfg = GameConfig::new(Instance::new(vec![1.0]).unwrap(), or_domain());
        assert!(matches!(cfg.validate(), Err(Error::SizeMismatch { .. })));
    }
}
