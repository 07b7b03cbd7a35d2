//! Full, neighborhood (C-SVE) and community (H-SVE) Shapley explanations.
//!
//! Every method reduces to Shapley values of some players inside a context of
//! features. Small contexts are enumerated exactly; larger ones fall back to
//! permutation sampling.

mod mc;

pub use mc::{mc_shapley, MarginalSource, McEstimate, Plugin, SingleDraw, Step};

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::feature_set::FeatureSet;
use crate::game::{
    finite_value, shapley_in_context, Attribution, CoalitionGame, ExactLimits, Memoized, Method,
};
use crate::graph::{neighborhood, BinaryAdjacency, CommunityPartition};
use crate::oracle::PredictionOracle;
use crate::value_fn::{GameConfig, Marginalizer, OracleGame};

/// Upper bound for `exact_cutoff`.
pub const MAX_EXACT_CUTOFF: usize = 20;

/// How sampled marginals are evaluated on oracle-backed games.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum McMode {
    /// Marginals of the memoized game, marginalized as configured.
    #[default]
    Plugin,
    /// One background draw per sampled permutation.
    SingleDraw,
}

impl McMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            McMode::Plugin => "plugin",
            McMode::SingleDraw => "single-draw",
        }
    }
}

impl fmt::Display for McMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for McMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plugin" => Ok(McMode::Plugin),
            "single-draw" => Ok(McMode::SingleDraw),
            other => Err(Error::invalid(format!(
                "unknown Monte Carlo mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SveOptions {
    pub mc_samples: usize,
    pub exact_cutoff: usize,
    pub seed: u64,
    /// Explain only these features.
    pub features: Option<FeatureSet>,
    pub mc_mode: McMode,
    /// When false, contexts too large for exact enumeration are refused.
    pub allow_mc: bool,
}

impl Default for SveOptions {
    fn default() -> Self {
        Self {
            mc_samples: 1000,
            exact_cutoff: 12,
            seed: 0,
            features: None,
            mc_mode: McMode::Plugin,
            allow_mc: true,
        }
    }
}

impl SveOptions {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.mc_samples == 0 {
            return Err(Error::invalid("mc_samples must be positive"));
        }
        if self.exact_cutoff == 0 || self.exact_cutoff > MAX_EXACT_CUTOFF {
            return Err(Error::invalid(format!(
                "exact_cutoff {} must lie in 1..={MAX_EXACT_CUTOFF}",
                self.exact_cutoff
            )));
        }
        if let Some(f) = &self.features {
            if f.bound() > n {
                return Err(Error::IndexOutOfRange {
                    index: f.bound() - 1,
                    n,
                });
            }
        }
        Ok(())
    }

    /// Exact enumeration iff `2^k <= max(2^exact_cutoff, 4m)`, and never
    /// beyond the subset-form limit.
    pub fn use_exact(&self, k: usize) -> bool {
        if k > ExactLimits::default().subset {
            return false;
        }
        let budget = (1u128 << self.exact_cutoff).max(4 * self.mc_samples as u128);
        (1u128 << k) <= budget
    }

    fn players(&self, n: usize) -> FeatureSet {
        match &self.features {
            Some(f) => f.clone(),
            None => FeatureSet::full(n),
        }
    }
}

/// Shapley values of `players` in the context, plus how they were obtained.
struct ContextResult {
    phi: Vec<(usize, f64)>,
    exact: bool,
    value_calls: u64,
}

fn solve_context<G: CoalitionGame + ?Sized>(
    game: &G,
    single: Option<&OracleGame>,
    context: &FeatureSet,
    players: &FeatureSet,
    opts: &SveOptions,
) -> Result<ContextResult> {
    let k = context.len();
    if opts.use_exact(k) {
        let res = shapley_in_context(game, context, players, ExactLimits::default().subset)?;
        return Ok(ContextResult {
            phi: res.phi,
            exact: true,
            value_calls: res.value_calls,
        });
    }
    if !opts.allow_mc {
        return Err(Error::TooManyPlayers {
            form: "exact context",
            n: k,
            limit: ExactLimits::default().subset,
        });
    }
    let plugin = Plugin(game);
    let phi = players
        .iter()
        .map(|r| {
            let est = match (opts.mc_mode, single) {
                (McMode::SingleDraw, Some(og)) => {
                    mc_shapley(&SingleDraw::new(og), context, r, opts.mc_samples, opts.seed)?
                }
                _ => mc_shapley(&plugin, context, r, opts.mc_samples, opts.seed)?,
            };
            Ok((r, est.value))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ContextResult {
        value_calls: 2 * opts.mc_samples as u64 * phi.len() as u64,
        phi,
        exact: false,
    })
}

fn assemble(n: usize, players: FeatureSet, method: Method, opts: &SveOptions) -> Attribution {
    let mut a = Attribution::new(vec![0.0; n], method, 0);
    a.computed = players;
    a.seed = Some(opts.seed);
    a
}

fn full_with<G: CoalitionGame + ?Sized>(
    game: &G,
    single: Option<&OracleGame>,
    opts: &SveOptions,
) -> Result<Attribution> {
    let n = game.n_players();
    opts.validate(n)?;
    let players = opts.players(n);
    if n == 0 || players.is_empty() {
        return Ok(assemble(n, players, Method::Exact, opts));
    }
    let res = solve_context(game, single, &FeatureSet::full(n), &players, opts)?;
    let method = if res.exact {
        Method::Exact
    } else {
        Method::MonteCarlo
    };
    let mut a = assemble(n, players, method, opts);
    for (r, v) in res.phi {
        a.phi[r] = v;
    }
    a.value_calls = res.value_calls;
    if !res.exact {
        a.mc_samples = Some(opts.mc_samples);
    }
    Ok(a)
}

/// Shapley values of the whole game; exact when the switch rule allows,
/// otherwise permutation sampling over all features.
pub fn full_sve<G: CoalitionGame + ?Sized>(game: &G, opts: &SveOptions) -> Result<Attribution> {
    full_with(game, None, opts)
}

/// C-SVE value of one feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsveValue {
    pub phi: f64,
    pub exact: bool,
    /// Coalitions requested from the game, `2^|N_r|` when exact.
    pub value_calls: u64,
}

fn check_adjacency(adj: &BinaryAdjacency, n: usize) -> Result<()> {
    if adj.n() != n {
        return Err(Error::SizeMismatch {
            what: "adjacency",
            expected: n,
            found: adj.n(),
        });
    }
    Ok(())
}

fn c_sve_with<G: CoalitionGame + ?Sized>(
    game: &G,
    single: Option<&OracleGame>,
    adj: &BinaryAdjacency,
    r: usize,
    opts: &SveOptions,
) -> Result<CsveValue> {
    let context = neighborhood(adj, r)?;
    let res = solve_context(game, single, &context, &FeatureSet::singleton(r), opts)?;
    Ok(CsveValue {
        phi: res.phi[0].1,
        exact: res.exact,
        value_calls: if res.exact {
            res.value_calls
        } else {
            2 * opts.mc_samples as u64
        },
    })
}

/// Shapley value of `r` in the subgame on its closed neighborhood `N_r`.
pub fn c_sve<G: CoalitionGame + ?Sized>(
    game: &G,
    adj: &BinaryAdjacency,
    r: usize,
    opts: &SveOptions,
) -> Result<CsveValue> {
    let n = game.n_players();
    opts.validate(n)?;
    check_adjacency(adj, n)?;
    c_sve_with(game, None, adj, r, opts)
}

fn c_sve_all_with<G: CoalitionGame + ?Sized>(
    game: &G,
    single: Option<&OracleGame>,
    adj: &BinaryAdjacency,
    opts: &SveOptions,
) -> Result<Attribution> {
    let n = game.n_players();
    opts.validate(n)?;
    check_adjacency(adj, n)?;
    let players = opts.players(n);
    let memo = Memoized::new(game);
    let values = players
        .to_vec()
        .into_par_iter()
        .map(|r| Ok((r, c_sve_with(&memo, single, adj, r, opts)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut a = assemble(n, players, Method::Csve, opts);
    for (r, v) in values {
        a.phi[r] = v.phi;
        if !v.exact {
            a.mc_samples = Some(opts.mc_samples);
        }
    }
    a.value_calls = memo.evaluations();
    Ok(a)
}

/// C-SVE for every requested feature, sharing evaluated coalitions across
/// overlapping neighborhoods.
pub fn c_sve_all<G: CoalitionGame + ?Sized>(
    game: &G,
    adj: &BinaryAdjacency,
    opts: &SveOptions,
) -> Result<Attribution> {
    c_sve_all_with(game, None, adj, opts)
}

/// H-SVE: each community is explained in its own restricted game, produced
/// by `factory`, and the per-community values are placed side by side.
pub fn h_sve<G, F>(
    factory: F,
    partition: &CommunityPartition,
    opts: &SveOptions,
) -> Result<Attribution>
where
    G: CoalitionGame,
    F: Fn(&FeatureSet) -> Result<G>,
{
    h_sve_with(factory, partition, opts, None)
}

fn h_sve_with<G, F>(
    factory: F,
    partition: &CommunityPartition,
    opts: &SveOptions,
    single: Option<fn(&G) -> &OracleGame>,
) -> Result<Attribution>
where
    G: CoalitionGame,
    F: Fn(&FeatureSet) -> Result<G>,
{
    let n = partition.n();
    opts.validate(n)?;
    let players = opts.players(n);
    let mut a = assemble(n, players.clone(), Method::Hsve, opts);
    for community in partition.communities() {
        let local = community.intersection(&players);
        if local.is_empty() {
            continue;
        }
        let game = factory(community)?;
        if game.n_players() != n {
            return Err(Error::SizeMismatch {
                what: "community game",
                expected: n,
                found: game.n_players(),
            });
        }
        let res = solve_context(&game, single.map(|f| f(&game)), community, &local, opts)?;
        for (r, v) in res.phi {
            a.phi[r] = v;
        }
        a.value_calls += res.value_calls;
        if !res.exact {
            a.mc_samples = Some(opts.mc_samples);
        }
    }
    Ok(a)
}

/// Leave-one-in baseline: `phi_r = v({r})`.
pub fn single_feature<G: CoalitionGame + ?Sized>(
    game: &G,
    opts: &SveOptions,
) -> Result<Attribution> {
    let n = game.n_players();
    opts.validate(n)?;
    let players = opts.players(n);
    let values = players
        .to_vec()
        .into_par_iter()
        .map(|r| Ok((r, finite_value(game, &FeatureSet::singleton(r))?)))
        .collect::<Result<Vec<_>>>()?;
    let mut a = assemble(n, players, Method::Single, opts);
    for (r, v) in values {
        a.phi[r] = v;
    }
    a.value_calls = a.computed.len() as u64;
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SveMethod {
    Full,
    Csve,
    Hsve,
    Single,
}

impl SveMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SveMethod::Full => "full",
            SveMethod::Csve => "csve",
            SveMethod::Hsve => "hsve",
            SveMethod::Single => "single",
        }
    }
}

impl fmt::Display for SveMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SveMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(SveMethod::Full),
            "csve" => Ok(SveMethod::Csve),
            "hsve" => Ok(SveMethod::Hsve),
            "single" => Ok(SveMethod::Single),
            other => Err(Error::invalid(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExplainRequest {
    pub method: SveMethod,
    /// Required for C-SVE.
    pub adjacency: Option<BinaryAdjacency>,
    /// Required for H-SVE.
    pub partition: Option<CommunityPartition>,
    pub options: SveOptions,
}

impl ExplainRequest {
    pub fn new(method: SveMethod) -> Self {
        Self {
            method,
            adjacency: None,
            partition: None,
            options: SveOptions::default(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.options.validate(n)?;
        match self.method {
            SveMethod::Csve => {
                let adj = self
                    .adjacency
                    .as_ref()
                    .ok_or(Error::MissingStructure("adjacency"))?;
                check_adjacency(adj, n)
            }
            SveMethod::Hsve => {
                let p = self
                    .partition
                    .as_ref()
                    .ok_or(Error::MissingStructure("partition"))?;
                if p.n() != n {
                    return Err(Error::SizeMismatch {
                        what: "partition",
                        expected: n,
                        found: p.n(),
                    });
                }
                Ok(())
            }
            SveMethod::Full | SveMethod::Single => Ok(()),
        }
    }
}

/// Oracle work done by one [`explain_with_stats`] call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExplainStats {
    /// Distinct corrupted sets marginalized.
    pub marginals: usize,
    /// Oracle predictions spent on those marginals.
    pub predictions: u64,
}

fn subsets(members: &FeatureSet) -> impl Iterator<Item = FeatureSet> + '_ {
    let list = members.to_vec();
    (0..1u64 << list.len()).map(move |m| FeatureSet::from_local_mask(&list, m))
}

pub fn explain(
    oracle: Arc<dyn PredictionOracle>,
    cfg: GameConfig,
    req: &ExplainRequest,
) -> Result<Attribution> {
    explain_with_stats(oracle, cfg, req).map(|(a, _)| a)
}

/// Explains `cfg.target` with the requested method. Marginals needed by
/// exactly enumerated contexts are computed up front in packed batches.
pub fn explain_with_stats(
    oracle: Arc<dyn PredictionOracle>,
    cfg: GameConfig,
    req: &ExplainRequest,
) -> Result<(Attribution, ExplainStats)> {
    if cfg.restrict_to.is_some() {
        return Err(Error::invalid(
            "restrict_to is set per community by H-SVE and must be empty in the request",
        ));
    }
    let n = cfg.n_features();
    req.validate(n)?;
    let opts = &req.options;
    let players = opts.players(n);
    let marginalizer = Arc::new(Marginalizer::new(oracle, cfg)?);
    let single_draw = opts.mc_mode == McMode::SingleDraw;

    let attribution = match req.method {
        SveMethod::Full => {
            let game = OracleGame::new(marginalizer.clone(), None)?;
            if opts.use_exact(n) && !players.is_empty() {
                game.prefetch(&subsets(&FeatureSet::full(n)).collect::<Vec<_>>())?;
            }
            full_with(&game, single_draw.then_some(&game), opts)?
        }
        SveMethod::Csve => {
            let adj = req.adjacency.as_ref().expect("validated");
            let game = OracleGame::new(marginalizer.clone(), None)?;
            let mut wanted = HashSet::new();
            for r in &players {
                let nr = neighborhood(adj, r)?;
                if opts.use_exact(nr.len()) {
                    wanted.extend(subsets(&nr));
                }
            }
            let mut wanted: Vec<FeatureSet> = wanted.into_iter().collect();
            wanted.sort();
            game.prefetch(&wanted)?;
            c_sve_all_with(&game, single_draw.then_some(&game), adj, opts)?
        }
        SveMethod::Hsve => {
            let partition = req.partition.as_ref().expect("validated");
            h_sve_with(
                |a| {
                    let game = OracleGame::new(marginalizer.clone(), Some(a.clone()))?;
                    if opts.use_exact(a.len()) {
                        game.prefetch(&subsets(a).collect::<Vec<_>>())?;
                    }
                    Ok(game)
                },
                partition,
                opts,
                single_draw.then_some(|g: &OracleGame| g),
            )?
        }
        SveMethod::Single => {
            let game = OracleGame::new(marginalizer.clone(), None)?;
            game.prefetch(
                &players
                    .iter()
                    .map(FeatureSet::singleton)
                    .collect::<Vec<_>>(),
            )?;
            single_feature(&game, opts)?
        }
    };
    let stats = ExplainStats {
        marginals: marginalizer.cached_sets(),
        predictions: marginalizer.predictions(),
    };
    Ok((attribution, stats))
}
