//! Self-checks run by the `validate` command. Each property recomputes a
//! known result from scratch and reports its worst residual.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::{corrupt_and_score, ranking};
use crate::explain::{
    explain, full_sve, mc_shapley, ExplainRequest, Plugin, SveMethod, SveOptions,
};
use crate::feature_set::FeatureSet;
use crate::fixtures::{
    gaussian_dataset, or_gate_config, planted_blocks, random_linear_softmax, random_lookup_setup,
    random_table_game, two_cliques,
};
use crate::game::{
    exact_shapley_permutation, exact_shapley_subset, verify_axioms, CoalitionGame, FnGame,
};
use crate::graph::{greedy_modularity, BinaryAdjacency, CommunityPartition, FeatureGraph};
use crate::oracle::{OrGate, PredictionOracle};
use crate::value_fn::{as_game, GameConfig};

pub const PROPERTIES: &[&str] = &[
    "or-gate",
    "axioms",
    "form-equivalence",
    "reductions",
    "planted",
    "myopia",
    "mc-convergence",
    "appendix-identity",
    "communities",
    "corruption-direction",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst deviation observed, in the property's own units.
    pub residual: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidateOptions {
    /// Largest player count in the appendix identity scan.
    pub identity_n: usize,
    pub seed: u64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            identity_n: 12,
            seed: 0,
        }
    }
}

fn outcome(name: &'static str, passed: bool, residual: f64, detail: String) -> PropertyOutcome {
    PropertyOutcome {
        name,
        passed,
        residual,
        detail,
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn run_all(opts: &ValidateOptions) -> Result<Vec<PropertyOutcome>> {
    PROPERTIES.iter().map(|p| run_property(p, opts)).collect()
}

pub fn run_property(name: &str, opts: &ValidateOptions) -> Result<PropertyOutcome> {
    let seed = opts.seed;
    match name {
        "or-gate" => or_gate(),
        "axioms" => axioms(seed),
        "form-equivalence" => form_equivalence(seed),
        "reductions" => reductions(seed),
        "planted" => planted(seed),
        "myopia" => myopia(),
        "mc-convergence" => mc_convergence(seed),
        "appendix-identity" => {
            let scan = appendix_identity_scan(opts.identity_n)?;
            let passed = scan.exponent_u.holds && !scan.exponent_u_minus_one.holds;
            Ok(outcome(
                "appendix-identity",
                passed,
                scan.exponent_u.max_relative_error,
                format!(
                    "exponent |U| holds: {} ({} configurations, max rel. error {:.3e}); \
                     exponent |U|-1 holds: {} ({} of {} configurations fail)",
                    scan.exponent_u.holds,
                    scan.configurations,
                    scan.exponent_u.max_relative_error,
                    scan.exponent_u_minus_one.holds,
                    scan.exponent_u_minus_one.failures,
                    scan.configurations,
                ),
            ))
        }
        "communities" => communities(seed),
        "corruption-direction" => {
            let (wins, total) = corruption_direction(100, 0.9, seed)?;
            Ok(outcome(
                "corruption-direction",
                wins >= 80,
                (total - wins) as f64,
                format!("{wins} of {total} instances (need 80)"),
            ))
        }
        other => Err(Error::invalid(format!(
            "unknown property `{other}`; expected one of {}",
            PROPERTIES.join(", ")
        ))),
    }
}

fn or_gate() -> Result<PropertyOutcome> {
    let game = as_game(Arc::new(OrGate), or_gate_config([1.0, 1.0]))?;
    let a = full_sve(&game, &SveOptions::default())?;
    let expect = 0.5 * (4.0f64 / 3.0).log2();
    let mut residual = max_abs_diff(&a.phi, &[expect, expect]);
    let values = [
        (FeatureSet::full(2), (4.0f64 / 3.0).log2()),
        (FeatureSet::singleton(0), 0.0),
        (FeatureSet::singleton(1), 0.0),
        (FeatureSet::empty(), 0.0),
    ];
    for (s, v) in &values {
        residual = residual.max((game.value(s)? - v).abs());
    }
    Ok(outcome(
        "or-gate",
        residual <= 1e-12,
        residual,
        format!("phi = ({:.12}, {:.12})", a.phi[0], a.phi[1]),
    ))
}

fn axioms(seed: u64) -> Result<PropertyOutcome> {
    let mut worst: f64 = 0.0;
    let mut failed = 0;
    for i in 0..100u64 {
        let n = 1 + (i % 8) as usize;
        let g = random_table_game(n, seed.wrapping_add(i));
        let h = random_table_game(n, seed.wrapping_add(i + 1000));
        let a = exact_shapley_subset(&g)?;
        let report = verify_axioms(&g, &a, Some((&g, &h)), 1e-9)?;
        worst = [
            worst,
            report.efficiency.residual,
            report.symmetry.residual,
            report.dummy.residual,
            report.additivity.residual,
        ]
        .into_iter()
        .fold(0.0, f64::max);
        // random games have no symmetric or dummy players; this one has both
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i + 7000));
        let by_size: Vec<f64> = (0..=n)
            .map(|k| {
                if k == 0 {
                    0.0
                } else {
                    rng.random_range(-1.0..1.0)
                }
            })
            .collect();
        let sym = FnGame::new(n + 1, |s: &FeatureSet| by_size[s.without(n).len()]);
        let b = exact_shapley_subset(&sym)?;
        let r2 = verify_axioms(&sym, &b, None, 1e-9)?;
        worst = worst
            .max(r2.efficiency.residual)
            .max(r2.dummy.residual)
            .max(r2.symmetry.residual);
        if !report.all_passed() || !r2.all_passed() {
            failed += 1;
        }
    }
    Ok(outcome(
        "axioms",
        failed == 0,
        worst,
        format!("100 random games, {failed} failing"),
    ))
}

fn form_equivalence(seed: u64) -> Result<PropertyOutcome> {
    let mut worst: f64 = 0.0;
    for i in 0..50u64 {
        let n = 1 + (i % 9) as usize;
        let g = random_table_game(n, seed.wrapping_add(2000 + i));
        let a = exact_shapley_subset(&g)?;
        let b = exact_shapley_permutation(&g)?;
        worst = worst.max(max_abs_diff(&a.phi, &b.phi));
    }
    Ok(outcome(
        "form-equivalence",
        worst <= 1e-12,
        worst,
        "50 random games, N <= 9".into(),
    ))
}

fn reductions(seed: u64) -> Result<PropertyOutcome> {
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let n = 2 + (i % 7) as usize;
        let (oracle, cfg) = random_lookup_setup(n, seed.wrapping_add(3000 + i));
        let oracle: Arc<dyn PredictionOracle> = oracle;
        let full = explain(
            oracle.clone(),
            cfg.clone(),
            &ExplainRequest::new(SveMethod::Full),
        )?;
        let mut c = ExplainRequest::new(SveMethod::Csve);
        c.adjacency = Some(BinaryAdjacency::complete(n));
        let c = explain(oracle.clone(), cfg.clone(), &c)?;
        let mut h = ExplainRequest::new(SveMethod::Hsve);
        h.partition = Some(CommunityPartition::single(n));
        let h = explain(oracle, cfg, &h)?;
        worst = worst
            .max(max_abs_diff(&c.phi, &full.phi))
            .max(max_abs_diff(&h.phi, &full.phi));
    }
    Ok(outcome(
        "reductions",
        worst <= 1e-12,
        worst,
        "20 oracle-backed games, complete adjacency and single community".into(),
    ))
}

/// Adjacency joining every pair inside the same block.
pub fn block_adjacency(blocks: &[FeatureSet], n: usize) -> Result<BinaryAdjacency> {
    let label = |i: usize| blocks.iter().position(|b| b.contains(i));
    BinaryAdjacency::from_bits(
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| i != j && label(i).is_some() && label(i) == label(j))
                    .collect()
            })
            .collect(),
    )
}

fn planted(seed: u64) -> Result<PropertyOutcome> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for i in 0..3u64 {
        let p = planted_blocks(4, seed.wrapping_add(4000 + i));
        let n = p.n_features();
        let oracle: Arc<dyn PredictionOracle> = p.oracle.clone();
        let adjacency = block_adjacency(&p.blocks, n)?;
        let partition = CommunityPartition::from_communities(n, &p.blocks)?;
        for k in [0usize, 37, 150, 255] {
            let cfg = p.config(k);
            let full = explain(
                oracle.clone(),
                cfg.clone(),
                &ExplainRequest::new(SveMethod::Full),
            )?;
            let mut c = ExplainRequest::new(SveMethod::Csve);
            c.adjacency = Some(adjacency.clone());
            let c = explain(oracle.clone(), cfg.clone(), &c)?;
            let mut h = ExplainRequest::new(SveMethod::Hsve);
            h.partition = Some(partition.clone());
            let h = explain(oracle.clone(), cfg, &h)?;
            worst = worst
                .max(max_abs_diff(&c.phi, &full.phi))
                .max(max_abs_diff(&h.phi, &full.phi));
            cases += 1;
        }
    }
    Ok(outcome(
        "planted",
        worst <= 1e-9,
        worst,
        format!("{cases} targets on planted 2-block instances"),
    ))
}

fn myopia() -> Result<PropertyOutcome> {
    let cfg = or_gate_config([1.0, 1.0]);
    let full = explain(
        Arc::new(OrGate),
        cfg.clone(),
        &ExplainRequest::new(SveMethod::Full),
    )?;
    let mut req = ExplainRequest::new(SveMethod::Csve);
    req.adjacency = Some(BinaryAdjacency::edgeless(2));
    let c = explain(Arc::new(OrGate), cfg, &req)?;
    let expect = 0.5 * (4.0f64 / 3.0).log2();
    let residual = max_abs_diff(&full.phi, &[expect, expect]);
    Ok(outcome(
        "myopia",
        c.phi == [0.0, 0.0] && residual <= 1e-12,
        residual,
        format!(
            "edgeless C-SVE = ({}, {}), full = ({:.5}, {:.5})",
            c.phi[0], c.phi[1], full.phi[0], full.phi[1]
        ),
    ))
}

/// Root mean square over features of the spread of estimates across seeds.
fn pooled_spread(estimates: &[Vec<f64>]) -> f64 {
    let seeds = estimates.len() as f64;
    let n = estimates[0].len();
    let mut total = 0.0;
    for r in 0..n {
        let mean = estimates.iter().map(|e| e[r]).sum::<f64>() / seeds;
        total += estimates.iter().map(|e| (e[r] - mean).powi(2)).sum::<f64>() / (seeds - 1.0);
    }
    (total / n as f64).sqrt()
}

fn mc_convergence(seed: u64) -> Result<PropertyOutcome> {
    let n = 8;
    let g = random_table_game(n, seed.wrapping_add(5000));
    let exact = exact_shapley_subset(&g)?;
    let full = FeatureSet::full(n);
    let mut worst_z: f64 = 0.0;
    let mut spreads = Vec::new();
    for m in [100usize, 1000, 10_000] {
        let mut estimates = Vec::new();
        for s in 0..20u64 {
            let mut row = Vec::with_capacity(n);
            for r in 0..n {
                let est = mc_shapley(&Plugin(&g), &full, r, m, seed.wrapping_add(s))?;
                if m == 10_000 {
                    worst_z = worst_z.max((est.value - exact.phi[r]).abs() / est.stderr);
                }
                row.push(est.value);
            }
            estimates.push(row);
        }
        spreads.push(pooled_spread(&estimates));
    }
    let ratios = [spreads[0] / spreads[1], spreads[1] / spreads[2]];
    let sqrt10 = 10f64.sqrt();
    let scaling_ok = ratios
        .iter()
        .all(|r| r / sqrt10 <= 1.5 && sqrt10 / r <= 1.5);
    Ok(outcome(
        "mc-convergence",
        worst_z <= 4.0 && scaling_ok,
        worst_z,
        format!(
            "max |error|/stderr at m=10000: {worst_z:.3}; spread ratios {:.3}, {:.3} (sqrt 10 = {sqrt10:.3})",
            ratios[0], ratios[1]
        ),
    ))
}

fn communities(seed: u64) -> Result<PropertyOutcome> {
    let (p, trace) = greedy_modularity(&two_cliques(5));
    let expect_blocks = p.len() == 2
        && p.communities()[0] == (0..5).collect::<FeatureSet>()
        && p.communities()[1] == (5..10).collect::<FeatureSet>();
    let residual = (trace.modularity - 0.5).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(6000));
    let mut non_increasing = 0;
    for _ in 0..50 {
        let n = rng.random_range(2..=30);
        let g = FeatureGraph::from_fn(n, |_, _| rng.random_range(-0.5..1.0))?;
        let (_, t) = greedy_modularity(&g);
        let mut prev = t.initial_modularity;
        for m in &t.merges {
            if m.modularity <= prev {
                non_increasing += 1;
            }
            prev = m.modularity;
        }
    }
    Ok(outcome(
        "communities",
        expect_blocks && residual <= 1e-9 && non_increasing == 0,
        residual,
        format!(
            "two cliques -> {} communities, Q = {:.12}; {non_increasing} non-increasing merges on 50 random graphs",
            p.len(),
            trace.modularity
        ),
    ))
}

/// Features, classes and weight scale of the synthetic corruption models.
const CORRUPTION_FEATURES: usize = 8;
const CORRUPTION_CLASSES: usize = 3;
const CORRUPTION_SCALE: f64 = 1.0;

/// One synthetic corruption instance: model, game configuration and the
/// class predicted for the target.
pub fn corruption_instance(seed: u64) -> Result<(Arc<dyn PredictionOracle>, GameConfig, usize)> {
    let n = CORRUPTION_FEATURES;
    let oracle = random_linear_softmax(n, CORRUPTION_CLASSES, CORRUPTION_SCALE, seed);
    let background = Arc::new(gaussian_dataset(128, n, seed ^ 0x6267));
    let target = gaussian_dataset(1, n, seed ^ 0x7467).instances()[0].clone();
    let class = ranking(&oracle.predict(&target)?)[0];
    Ok((Arc::new(oracle), GameConfig::new(target, background), class))
}

/// Counts instances where corrupting the full-SVE coverage prefix lowers the
/// predicted-class probability at least as much as the single-feature prefix.
pub fn corruption_direction(instances: u64, coverage: f64, seed: u64) -> Result<(usize, usize)> {
    let mut wins = 0;
    for i in 0..instances {
        let (oracle, cfg, class) = corruption_instance(seed.wrapping_add(i))?;
        let full = explain(
            oracle.clone(),
            cfg.clone(),
            &ExplainRequest::new(SveMethod::Full),
        )?;
        let single = explain(
            oracle.clone(),
            cfg.clone(),
            &ExplainRequest::new(SveMethod::Single),
        )?;
        let a = corrupt_and_score(oracle.as_ref(), &cfg, &full, coverage, class);
        let b = corrupt_and_score(oracle.as_ref(), &cfg, &single, coverage, class);
        match (a, b) {
            (Ok(a), Ok(b)) if a.delta_prob >= b.delta_prob - 1e-12 => wins += 1,
            (Ok(_), Err(Error::NoPositiveAttribution)) => wins += 1,
            (Ok(_), Ok(_)) | (Err(Error::NoPositiveAttribution), _) => {}
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    Ok((wins, instances as usize))
}

/// Outcome of comparing the identity for one candidate exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentCheck {
    pub holds: bool,
    pub failures: usize,
    /// Over configurations where the right-hand side is finite.
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityScan {
    pub max_n: usize,
    pub configurations: usize,
    pub exponent_u_minus_one: ExponentCheck,
    pub exponent_u: ExponentCheck,
}

fn binomial(n: usize, k: i64) -> f64 {
    if k < 0 || k as usize > n {
        return 0.0;
    }
    let k = k as usize;
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

const IDENTITY_TOLERANCE: f64 = 1e-12;

/// Brute-forces `Σ_{A ⊆ N\{r}, A ∩ N_r = U} 1 / C(|N|-1, |A|)` and compares it
/// with `(|N| / |N_r|) / C(|N_r| - 1, e)` for `e = |U| - 1` and `e = |U|`.
///
/// Player `0` is `r`, `N_r = {0..k-1}` and `U = {1..u}`; the sum only depends
/// on the three sizes.
pub fn appendix_identity_scan(max_n: usize) -> Result<IdentityScan> {
    if max_n == 0 || max_n > 16 {
        return Err(Error::invalid(format!(
            "identity scan size {max_n} must lie in 1..=16"
        )));
    }
    let mut configurations = 0;
    let mut checks = [ExponentCheck {
        holds: true,
        failures: 0,
        max_relative_error: 0.0,
    }; 2];
    for n in 1..=max_n {
        for k in 1..=n {
            let nr_others: u64 = ((1u64 << k) - 1) & !1;
            for u in 0..k {
                let target_u: u64 = ((1u64 << (u + 1)) - 1) & !1;
                let mut lhs = 0.0;
                for a in 0..1u64 << n {
                    if a & 1 != 0 || a & nr_others != target_u {
                        continue;
                    }
                    lhs += 1.0 / binomial(n - 1, i64::from(a.count_ones()));
                }
                configurations += 1;
                for (check, e) in checks.iter_mut().zip([u as i64 - 1, u as i64]) {
                    let rhs = (n as f64 / k as f64) / binomial(k - 1, e);
                    let rel = (lhs - rhs).abs() / lhs.abs().max(f64::MIN_POSITIVE);
                    if !rhs.is_finite() || rel > IDENTITY_TOLERANCE {
                        check.failures += 1;
                        check.holds = false;
                    }
                    if rhs.is_finite() {
                        check.max_relative_error = check.max_relative_error.max(rel);
                    }
                }
            }
        }
    }
    Ok(IdentityScan {
        max_n,
        configurations,
        exponent_u_minus_one: checks[0],
        exponent_u: checks[1],
    })
}
