//! Permutation-sampling Shapley estimators.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::data::{compose, Instance};
use crate::error::{Error, Result};
use crate::feature_set::FeatureSet;
use crate::game::{finite_value, CoalitionGame};
use crate::keyed::{self, tag};
use crate::value_fn::OracleGame;

/// One sampled marginal contribution: `r` joins the predecessors `pre`.
#[derive(Debug, Clone)]
pub struct Step {
    pub context: FeatureSet,
    pub pre: FeatureSet,
    pub r: usize,
    /// Key for any randomness the source needs beyond the permutation.
    pub draw_key: u64,
}

/// Evaluates marginal contributions for sampled permutations.
pub trait MarginalSource: Sync {
    fn n_players(&self) -> usize;

    /// One marginal per step, in order.
    fn marginals(&self, steps: &[Step]) -> Result<Vec<f64>>;
}

/// `v(Pre ∪ {r}) - v(Pre)` on a coalition game.
pub struct Plugin<G>(pub G);

impl<G: CoalitionGame> MarginalSource for Plugin<G> {
    fn n_players(&self) -> usize {
        self.0.n_players()
    }

    fn marginals(&self, steps: &[Step]) -> Result<Vec<f64>> {
        steps
            .par_iter()
            .map(|s| Ok(finite_value(&self.0, &s.pre.with(s.r))? - finite_value(&self.0, &s.pre)?))
            .collect()
    }
}

/// One background instance per step, spliced into the target.
///
/// The step keeps `Pre ∪ {r}` (resp. `Pre`) and every feature outside the
/// context from the target, and takes the remaining context features and the
/// game's baseline from the drawn instance. The marginal is the difference of
/// the two label log-likelihoods under the game's reference posterior.
pub struct SingleDraw<'a> {
    game: &'a OracleGame,
}

impl<'a> SingleDraw<'a> {
    pub fn new(game: &'a OracleGame) -> Self {
        Self { game }
    }
}

impl MarginalSource for SingleDraw<'_> {
    fn n_players(&self) -> usize {
        self.game.n_players()
    }

    fn marginals(&self, steps: &[Step]) -> Result<Vec<f64>> {
        let cfg = self.game.marginalizer().config();
        let n = cfg.n_features();
        let rows = cfg.background.instances();
        let instances: Vec<Instance> = steps
            .par_iter()
            .map(|s| {
                let x_hat = &rows[keyed::rng(s.draw_key, &[]).random_range(0..rows.len())];
                let fixed = self.game.baseline().union(&s.context).complement(n);
                let with_r = compose(&cfg.target, x_hat, &fixed.union(&s.pre).with(s.r))?;
                let without = compose(&cfg.target, x_hat, &fixed.union(&s.pre))?;
                Ok([with_r, without])
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        let oracle = self.game.marginalizer().oracle();
        let chunk = cfg.batch_size.max(2) & !1;
        let scores: Vec<f64> = if oracle.concurrent_safe() {
            instances
                .par_chunks(chunk)
                .map(|c| self.game.instance_scores(c))
                .collect::<Result<Vec<_>>>()?
                .concat()
        } else {
            let mut out = Vec::with_capacity(instances.len());
            for c in instances.chunks(chunk) {
                out.extend(self.game.instance_scores(c)?);
            }
            out
        };
        Ok(scores.chunks(2).map(|p| p[0] - p[1]).collect())
    }
}

/// Mean of `m` sampled marginals with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    /// Sample standard deviation over `sqrt(m)`; 0 when `m = 1`.
    pub stderr: f64,
    pub samples: usize,
}

/// Steps generated and evaluated together.
const BLOCK: usize = 4096;

fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Predecessors of `r` in a uniform random order of `members`, keyed on
/// `(seed, r, iteration)`.
pub(crate) fn predecessors(members: &[usize], r: usize, seed: u64, iteration: u64) -> FeatureSet {
    let mut order = members.to_vec();
    order.shuffle(&mut keyed::rng(
        seed,
        &[tag::PERMUTATION, r as u64, iteration],
    ));
    order.iter().take_while(|&&p| p != r).copied().collect()
}

/// Estimates the Shapley value of `r` in the subgame on `context` from `m`
/// random orders of the context.
pub fn mc_shapley<S: MarginalSource + ?Sized>(
    source: &S,
    context: &FeatureSet,
    r: usize,
    m: usize,
    seed: u64,
) -> Result<McEstimate> {
    if m == 0 {
        return Err(Error::invalid("Monte Carlo needs at least one sample"));
    }
    if context.is_empty() {
        return Err(Error::invalid("empty coalition context"));
    }
    if !context.contains(r) {
        return Err(Error::invalid(format!(
            "feature {r} is not in context {context}"
        )));
    }
    if context.bound() > source.n_players() {
        return Err(Error::IndexOutOfRange {
            index: context.bound() - 1,
            n: source.n_players(),
        });
    }
    let members = context.to_vec();
    let mut samples = Vec::with_capacity(m);
    let mut start = 0;
    while start < m {
        let end = (start + BLOCK).min(m);
        let steps: Vec<Step> = (start..end)
            .into_par_iter()
            .map(|it| Step {
                context: context.clone(),
                pre: predecessors(&members, r, seed, it as u64),
                r,
                draw_key: keyed::derive(seed, &[tag::DRAW, r as u64, it as u64]),
            })
            .collect();
        samples.extend(source.marginals(&steps)?);
        start = end;
    }
    if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFiniteValue {
            subset: format!("marginal of {r} in {context}"),
            value: *bad,
        });
    }
    let mean = pairwise_sum(&samples) / m as f64;
    let stderr = if m > 1 {
        let dev: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
        (pairwise_sum(&dev) / (m - 1) as f64 / m as f64).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        value: mean,
        stderr,
        samples: m,
    })
}
