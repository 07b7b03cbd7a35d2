//! Finite cooperative games and their Shapley values.

mod axioms;
mod exact;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

pub use axioms::{verify_axioms, AxiomCheck, AxiomReport, AXIOM_PLAYER_LIMIT};
pub use exact::{
    exact_shapley_permutation, exact_shapley_permutation_with, exact_shapley_subset,
    exact_shapley_subset_with, shapley_in_context, shapley_weights, ContextShapley, ExactLimits,
};

use crate::error::{Error, Result};
use crate::feature_set::FeatureSet;

/// A cooperative game over players `0..n_players()`.
///
/// `value` must be deterministic and return exactly `0.0` for the empty
/// coalition. Implementations are evaluated from several threads at once.
pub trait CoalitionGame: Sync {
    fn n_players(&self) -> usize;

    fn value(&self, coalition: &FeatureSet) -> Result<f64>;
}

impl<G: CoalitionGame + ?Sized> CoalitionGame for &G {
    fn n_players(&self) -> usize {
        (**self).n_players()
    }

    fn value(&self, coalition: &FeatureSet) -> Result<f64> {
        (**self).value(coalition)
    }
}

impl<G: CoalitionGame + ?Sized> CoalitionGame for Box<G> {
    fn n_players(&self) -> usize {
        (**self).n_players()
    }

    fn value(&self, coalition: &FeatureSet) -> Result<f64> {
        (**self).value(coalition)
    }
}

/// Evaluates `game` and rejects non-finite values, naming the coalition.
pub(crate) fn finite_value<G: CoalitionGame + ?Sized>(game: &G, s: &FeatureSet) -> Result<f64> {
    let v = game.value(s)?;
    if !v.is_finite() {
        return Err(Error::NonFiniteValue {
            subset: s.to_string(),
            value: v,
        });
    }
    if s.is_empty() && v != 0.0 {
        return Err(Error::invalid(format!(
            "characteristic function must vanish on the empty coalition, got {v}"
        )));
    }
    Ok(v)
}

/// A game stored as a dense table indexed by coalition mask.
#[derive(Debug, Clone, PartialEq)]
pub struct TableGame {
    n: usize,
    values: Vec<f64>,
}

impl TableGame {
    /// Largest player count a dense table is allowed to hold.
    pub const MAX_PLAYERS: usize = 24;

    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n > Self::MAX_PLAYERS {
            return Err(Error::TooManyPlayers {
                form: "table",
                n,
                limit: Self::MAX_PLAYERS,
            });
        }
        if values.len() != 1usize << n {
            return Err(Error::SizeMismatch {
                what: "game table",
                expected: 1 << n,
                found: values.len(),
            });
        }
        if values[0] != 0.0 {
            return Err(Error::invalid(
                "table value of the empty coalition must be 0",
            ));
        }
        Ok(Self { n, values })
    }

    /// Tabulates `f` over every coalition mask; the empty coalition is pinned to 0.
    pub fn from_fn(n: usize, mut f: impl FnMut(u64) -> f64) -> Self {
        assert!(
            n <= Self::MAX_PLAYERS,
            "table games hold at most 24 players"
        );
        let values = (0..1u64 << n)
            .map(|m| if m == 0 { 0.0 } else { f(m) })
            .collect();
        Self { n, values }
    }

    /// Tabulates any game. Intended for small `n`.
    pub fn tabulate<G: CoalitionGame + ?Sized>(game: &G) -> Result<Self> {
        let n = game.n_players();
        if n > Self::MAX_PLAYERS {
            return Err(Error::TooManyPlayers {
                form: "table",
                n,
                limit: Self::MAX_PLAYERS,
            });
        }
        let values = (0..1u64 << n)
            .map(|m| finite_value(game, &FeatureSet::from_mask(m)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, mask: u64) -> f64 {
        self.values[mask as usize]
    }
}

impl CoalitionGame for TableGame {
    fn n_players(&self) -> usize {
        self.n
    }

    fn value(&self, coalition: &FeatureSet) -> Result<f64> {
        match coalition.as_mask() {
            Some(m) if (m >> self.n) == 0 => Ok(self.values[m as usize]),
            _ => Err(Error::IndexOutOfRange {
                index: coalition.bound().saturating_sub(1),
                n: self.n,
            }),
        }
    }
}

/// A game backed by a closure.
pub struct FnGame<F> {
    n: usize,
    f: F,
}

impl<F> FnGame<F>
where
    F: Fn(&FeatureSet) -> f64 + Sync,
{
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<F> CoalitionGame for FnGame<F>
where
    F: Fn(&FeatureSet) -> f64 + Sync,
{
    fn n_players(&self) -> usize {
        self.n
    }

    fn value(&self, coalition: &FeatureSet) -> Result<f64> {
        if coalition.is_empty() {
            return Ok(0.0);
        }
        Ok((self.f)(coalition))
    }
}

/// `g + h`, the game used to check additivity.
pub struct SumGame<G, H> {
    pub g: G,
    pub h: H,
}

impl<G: CoalitionGame, H: CoalitionGame> CoalitionGame for SumGame<G, H> {
    fn n_players(&self) -> usize {
        self.g.n_players()
    }

    fn value(&self, coalition: &FeatureSet) -> Result<f64> {
        Ok(self.g.value(coalition)? + self.h.value(coalition)?)
    }
}

/// Caches every evaluated coalition. Cheap to share across solvers.
pub struct Memoized<G> {
    inner: G,
    memo: Mutex<HashMap<FeatureSet, f64>>,
}

impl<G: CoalitionGame> Memoized<G> {
    pub fn new(inner: G) -> Self {
        Self {
            inner,
            memo: Mutex::new(HashMap::new()),
        }
    }

    /// Distinct coalitions evaluated so far.
    pub fn evaluations(&self) -> u64 {
        self.memo.lock().expect("memo poisoned").len() as u64
    }

    pub fn inner(&self) -> &G {
        &self.inner
    }
}

impl<G: CoalitionGame> CoalitionGame for Memoized<G> {
    fn n_players(&self) -> usize {
        self.inner.n_players()
    }

    fn value(&self, coalition: &FeatureSet) -> Result<f64> {
        if let Some(&v) = self.memo.lock().expect("memo poisoned").get(coalition) {
            return Ok(v);
        }
        let v = self.inner.value(coalition)?;
        self.memo
            .lock()
            .expect("memo poisoned")
            .insert(coalition.clone(), v);
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Exact,
    ExactPermutation,
    Csve,
    Hsve,
    MonteCarlo,
    /// Leave-one-in ablation, `phi_r = v({r})`.
    Single,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::ExactPermutation => "exact-permutation",
            Method::Csve => "csve",
            Method::Hsve => "hsve",
            Method::MonteCarlo => "monte-carlo",
            Method::Single => "single",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "exact" | "full" => Method::Exact,
            "exact-permutation" => Method::ExactPermutation,
            "csve" => Method::Csve,
            "hsve" => Method::Hsve,
            "monte-carlo" | "mc" => Method::MonteCarlo,
            "single" => Method::Single,
            other => return Err(Error::invalid(format!("unknown method `{other}`"))),
        })
    }
}

/// Per-feature prediction power together with how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    /// One entry per feature. Entries outside `computed` are 0.
    pub phi: Vec<f64>,
    pub computed: FeatureSet,
    pub method: Method,
    /// Set when any coalition was estimated by Monte Carlo.
    pub mc_samples: Option<usize>,
    pub seed: Option<u64>,
    pub value_calls: u64,
    /// Number of games summed into this attribution.
    pub games: usize,
}

impl Attribution {
    pub fn new(phi: Vec<f64>, method: Method, value_calls: u64) -> Self {
        let computed = FeatureSet::full(phi.len());
        Self {
            phi,
            computed,
            method,
            mc_samples: None,
            seed: None,
            value_calls,
            games: 1,
        }
    }

    pub fn n_features(&self) -> usize {
        self.phi.len()
    }

    pub fn get(&self, r: usize) -> Option<f64> {
        self.computed.contains(r).then(|| self.phi[r])
    }

    pub fn is_complete(&self) -> bool {
        self.computed.len() == self.phi.len()
    }

    pub(crate) fn require_complete(&self) -> Result<()> {
        match (0..self.phi.len()).find(|&r| !self.computed.contains(r)) {
            Some(r) => Err(Error::IncompleteAttribution(r)),
            None => Ok(()),
        }
    }

    pub fn total(&self) -> f64 {
        self.phi.iter().sum()
    }
}
