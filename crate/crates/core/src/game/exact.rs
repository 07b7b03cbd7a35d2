//! Exact Shapley values by subset enumeration and by permutation enumeration.

use rayon::prelude::*;

use super::{finite_value, Attribution, CoalitionGame, Method};
use crate::error::{Error, Result};
use crate::feature_set::FeatureSet;

/// Player-count ceilings for the two exact forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactLimits {
    /// Subset form evaluates `2^n` coalitions.
    pub subset: usize,
    /// Permutation form walks `n!` orders.
    pub permutation: usize,
}

impl Default for ExactLimits {
    fn default() -> Self {
        Self {
            subset: 20,
            permutation: 10,
        }
    }
}

/// Hard ceiling for subset enumeration regardless of configuration.
const SUBSET_CEILING: usize = 30;

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    let mut acc = 0.0f64;
    table.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        table.push(acc);
    }
    table
}

/// `w[s] = s! (k - s - 1)! / k!`, the weight of a coalition of size `s` that
/// excludes the player, in a game of `k` players.
pub fn shapley_weights(k: usize) -> Vec<f64> {
    if k == 0 {
        return Vec::new();
    }
    let lf = ln_factorials(k);
    (0..k)
        .map(|s| (lf[s] + lf[k - s - 1] - lf[k]).exp())
        .collect()
}

/// Shapley values of selected players in the game restricted to `context`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextShapley {
    /// `(player, phi)` pairs in ascending player order.
    pub phi: Vec<(usize, f64)>,
    /// Coalitions evaluated, always `2^|context|`.
    pub value_calls: u64,
}

/// Evaluates the game on every subset of `members`, indexed by local mask.
pub(crate) fn context_values<G: CoalitionGame + ?Sized>(
    game: &G,
    members: &[usize],
) -> Result<Vec<f64>> {
    let k = members.len();
    (0..1u64 << k)
        .into_par_iter()
        .map(|m| finite_value(game, &FeatureSet::from_local_mask(members, m)))
        .collect()
}

/// Shapley values of `players` in the subgame of `game` on `context`: each
/// player's marginal contributions to coalitions drawn from
/// `context \ {player}`, weighted by `1 / (k * C(k - 1, |S|))`.
pub fn shapley_in_context<G: CoalitionGame + ?Sized>(
    game: &G,
    context: &FeatureSet,
    players: &FeatureSet,
    limit: usize,
) -> Result<ContextShapley> {
    let k = context.len();
    let limit = limit.min(SUBSET_CEILING);
    if k > limit {
        return Err(Error::TooManyPlayers {
            form: "subset",
            n: k,
            limit,
        });
    }
    if k == 0 {
        return Err(Error::invalid("empty coalition context"));
    }
    if !players.is_subset(context) {
        return Err(Error::invalid(format!(
            "players {players} are not all inside context {context}"
        )));
    }
    let bound = game.n_players();
    if context.bound() > bound {
        return Err(Error::IndexOutOfRange {
            index: context.bound() - 1,
            n: bound,
        });
    }

    let members = context.to_vec();
    let values = context_values(game, &members)?;
    let weights = shapley_weights(k);

    let phi = members
        .iter()
        .enumerate()
        .filter(|(_, p)| players.contains(**p))
        .map(|(local, &p)| {
            let bit = 1u64 << local;
            let mut acc = 0.0;
            for m in 0..1u64 << k {
                if m & bit == 0 {
                    let s = m.count_ones() as usize;
                    acc += weights[s] * (values[(m | bit) as usize] - values[m as usize]);
                }
            }
            (p, acc)
        })
        .collect();

    Ok(ContextShapley {
        phi,
        value_calls: 1u64 << k,
    })
}

pub fn exact_shapley_subset<G: CoalitionGame + ?Sized>(game: &G) -> Result<Attribution> {
    exact_shapley_subset_with(game, ExactLimits::default())
}

/// Exact Shapley values from the weighted sum over all coalitions.
pub fn exact_shapley_subset_with<G: CoalitionGame + ?Sized>(
    game: &G,
    limits: ExactLimits,
) -> Result<Attribution> {
    let n = game.n_players();
    if n > limits.subset {
        return Err(Error::TooManyPlayers {
            form: "subset",
            n,
            limit: limits.subset,
        });
    }
    if n == 0 {
        return Ok(Attribution::new(Vec::new(), Method::Exact, 0));
    }
    let all = FeatureSet::full(n);
    let res = shapley_in_context(game, &all, &all, limits.subset)?;
    let phi = res.phi.into_iter().map(|(_, v)| v).collect();
    Ok(Attribution::new(phi, Method::Exact, res.value_calls))
}

pub fn exact_shapley_permutation<G: CoalitionGame + ?Sized>(game: &G) -> Result<Attribution> {
    exact_shapley_permutation_with(game, ExactLimits::default())
}

/// Exact Shapley values as the average marginal contribution over all `n!`
/// player orders.
pub fn exact_shapley_permutation_with<G: CoalitionGame + ?Sized>(
    game: &G,
    limits: ExactLimits,
) -> Result<Attribution> {
    let n = game.n_players();
    if n > limits.permutation {
        return Err(Error::TooManyPlayers {
            form: "permutation",
            n,
            limit: limits.permutation,
        });
    }
    if n == 0 {
        return Ok(Attribution::new(Vec::new(), Method::ExactPermutation, 0));
    }

    let mut memo: Vec<Option<f64>> = vec![None; 1 << n];
    let mut calls = 0u64;
    let mut lookup = |mask: u64| -> Result<f64> {
        if let Some(v) = memo[mask as usize] {
            return Ok(v);
        }
        let v = finite_value(game, &FeatureSet::from_mask(mask))?;
        memo[mask as usize] = Some(v);
        calls += 1;
        Ok(v)
    };

    let mut sums = vec![0.0f64; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut orders = 0u64;
    loop {
        let mut prefix = 0u64;
        let mut before = lookup(0)?;
        for &p in &order {
            prefix |= 1 << p;
            let after = lookup(prefix)?;
            sums[p] += after - before;
            before = after;
        }
        orders += 1;
        if !next_permutation(&mut order) {
            break;
        }
    }

    let phi = sums.into_iter().map(|s| s / orders as f64).collect();
    Ok(Attribution::new(phi, Method::ExactPermutation, calls))
}

/// Advances to the next lexicographic permutation. False once exhausted.
fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}
