//! Checks an attribution against the four Shapley axioms.

use super::{
    exact_shapley_subset_with, finite_value, Attribution, CoalitionGame, ExactLimits, FnGame,
    SumGame,
};
use crate::error::{Error, Result};
use crate::feature_set::FeatureSet;

/// Symmetry and dummy detection enumerate every coalition.
pub const AXIOM_PLAYER_LIMIT: usize = 16;

/// Players are treated as interchangeable or dummy when the relevant
/// coalition values agree within this bound.
const DETECTION_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomCheck {
    pub passed: bool,
    pub residual: f64,
}

impl AxiomCheck {
    fn new(residual: f64, tolerance: f64) -> Self {
        Self {
            passed: residual <= tolerance,
            residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub efficiency: AxiomCheck,
    pub symmetry: AxiomCheck,
    pub dummy: AxiomCheck,
    pub additivity: AxiomCheck,
    /// Interchangeable pairs found by enumeration.
    pub symmetric_pairs: Vec<(usize, usize)>,
    /// Dummy players found by enumeration.
    pub dummies: Vec<usize>,
}

impl AxiomReport {
    pub fn all_passed(&self) -> bool {
        self.efficiency.passed
            && self.symmetry.passed
            && self.dummy.passed
            && self.additivity.passed
    }
}

/// Verifies efficiency, symmetry, dummy and additivity for an exact attribution.
///
/// Additivity is checked on `pair` when given: `phi(g + h)` against
/// `phi(g) + phi(h)`. Without a pair the game is split into its odd- and
/// even-cardinality parts and the supplied attribution is compared with the
/// sum of their exact attributions.
pub fn verify_axioms<G: CoalitionGame + ?Sized>(
    game: &G,
    attribution: &Attribution,
    pair: Option<(&dyn CoalitionGame, &dyn CoalitionGame)>,
    tolerance: f64,
) -> Result<AxiomReport> {
    let n = game.n_players();
    if attribution.phi.len() != n {
        return Err(Error::SizeMismatch {
            what: "attribution",
            expected: n,
            found: attribution.phi.len(),
        });
    }
    if n > AXIOM_PLAYER_LIMIT {
        return Err(Error::TooManyPlayers {
            form: "axiom verification",
            n,
            limit: AXIOM_PLAYER_LIMIT,
        });
    }
    attribution.require_complete()?;
    let phi = &attribution.phi;
    let values = (0..1u64 << n)
        .map(|m| finite_value(game, &FeatureSet::from_mask(m)))
        .collect::<Result<Vec<_>>>()?;
    let v = |m: u64| values[m as usize];
    let full = (1u64 << n) - 1;

    let efficiency = AxiomCheck::new((phi.iter().sum::<f64>() - v(full)).abs(), tolerance);

    let mut symmetric_pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (bi, bj) = (1u64 << i, 1u64 << j);
            let interchangeable = (0..=full)
                .filter(|m| m & (bi | bj) == 0)
                .all(|m| (v(m | bi) - v(m | bj)).abs() <= DETECTION_EPS);
            if interchangeable {
                symmetric_pairs.push((i, j));
            }
        }
    }
    let sym_residual = symmetric_pairs
        .iter()
        .map(|&(i, j)| (phi[i] - phi[j]).abs())
        .fold(0.0, f64::max);

    let dummies: Vec<usize> = (0..n)
        .filter(|&i| {
            let b = 1u64 << i;
            (0..=full)
                .filter(|m| m & b == 0)
                .all(|m| (v(m | b) - v(m)).abs() <= DETECTION_EPS)
        })
        .collect();
    let dummy_residual = dummies.iter().map(|&i| phi[i].abs()).fold(0.0, f64::max);

    let limits = ExactLimits {
        subset: AXIOM_PLAYER_LIMIT,
        ..ExactLimits::default()
    };
    let additivity_residual = match pair {
        Some((g, h)) => {
            if g.n_players() != n || h.n_players() != n {
                return Err(Error::SizeMismatch {
                    what: "additivity game pair",
                    expected: n,
                    found: g.n_players().max(h.n_players()),
                });
            }
            let sum = exact_shapley_subset_with(&SumGame { g, h }, limits)?;
            let pg = exact_shapley_subset_with(g, limits)?;
            let ph = exact_shapley_subset_with(h, limits)?;
            max_gap(&sum.phi, &pg.phi, &ph.phi)
        }
        None => {
            let odd = FnGame::new(n, |s: &FeatureSet| {
                if s.len() % 2 == 1 {
                    values[s.as_mask().unwrap() as usize]
                } else {
                    0.0
                }
            });
            let even = FnGame::new(n, |s: &FeatureSet| {
                if s.len().is_multiple_of(2) {
                    values[s.as_mask().unwrap() as usize]
                } else {
                    0.0
                }
            });
            let po = exact_shapley_subset_with(&odd, limits)?;
            let pe = exact_shapley_subset_with(&even, limits)?;
            max_gap(phi, &po.phi, &pe.phi)
        }
    };

    Ok(AxiomReport {
        efficiency,
        symmetry: AxiomCheck::new(sym_residual, tolerance),
        dummy: AxiomCheck::new(dummy_residual, tolerance),
        additivity: AxiomCheck::new(additivity_residual, tolerance),
        symmetric_pairs,
        dummies,
    })
}

fn max_gap(total: &[f64], a: &[f64], b: &[f64]) -> f64 {
    total
        .iter()
        .zip(a.iter().zip(b))
        .map(|(t, (x, y))| (t - (x + y)).abs())
        .fold(0.0, f64::max)
}
