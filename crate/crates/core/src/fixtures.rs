//! Seeded synthetic games, oracles and datasets used by tests, the
//! validation suite and the command-line built-ins.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{BackgroundDataset, Instance};
use crate::error::Result;
use crate::feature_set::FeatureSet;
use crate::game::TableGame;
use crate::graph::FeatureGraph;
use crate::oracle::{LinearSoftmax, LookupOracle};
use crate::value_fn::GameConfig;

/// The four points of `{0,1}^2`.
pub fn or_gate_background() -> BackgroundDataset {
    binary_domain(2)
}

/// Game configuration for the OR gate at `target` over its full domain.
pub fn or_gate_config(target: [f64; 2]) -> GameConfig {
    GameConfig::new(
        Instance::new(target.to_vec()).expect("finite target"),
        Arc::new(or_gate_background()),
    )
}

/// Every point of `{0,1}^n`; row `k` has feature `i` equal to bit `i` of `k`.
pub fn binary_domain(n: usize) -> BackgroundDataset {
    let rows = (0..1u64 << n)
        .map(|k| (0..n).map(|i| ((k >> i) & 1) as f64).collect())
        .collect();
    BackgroundDataset::from_rows(rows).expect("non-empty domain")
}

/// Coalition values uniform on `[-1, 1)`, with `v(∅) = 0`.
pub fn random_table_game(n: usize, seed: u64) -> TableGame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TableGame::from_fn(n, |_| rng.random_range(-1.0..1.0))
}

fn random_distribution(rng: &mut ChaCha8Rng, classes: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..classes).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

/// A lookup oracle on `{0,1}^n` with an independent random posterior at every
/// point.
pub fn random_lookup_oracle(n: usize, classes: usize, seed: u64) -> LookupOracle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LookupOracle::tabulate(n, 2, classes, |_| random_distribution(&mut rng, classes))
        .expect("valid table")
}

/// A random lookup oracle on `{0,1}^n`, its full domain as background and a
/// random target, with exhaustive marginalization.
pub fn random_lookup_setup(n: usize, seed: u64) -> (Arc<LookupOracle>, GameConfig) {
    let oracle = Arc::new(random_lookup_oracle(n, 2, seed));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7461_7267);
    let target = (0..n)
        .map(|_| f64::from(rng.random_range(0..2u8)))
        .collect();
    let cfg = GameConfig::new(
        Instance::new(target).expect("finite target"),
        Arc::new(binary_domain(n)),
    );
    (oracle, cfg)
}

/// Two independent blocks of binary features where the label depends on the
/// first block only.
pub struct PlantedBlocks {
    pub oracle: Arc<LookupOracle>,
    /// The full domain, uniform, so the blocks are independent.
    pub background: Arc<BackgroundDataset>,
    pub blocks: [FeatureSet; 2],
}

impl PlantedBlocks {
    pub fn n_features(&self) -> usize {
        self.blocks[0].len() + self.blocks[1].len()
    }

    /// The `k`-th domain point, usable as a target.
    pub fn point(&self, k: usize) -> Instance {
        self.background.instances()[k % self.background.len()].clone()
    }

    pub fn config(&self, k: usize) -> GameConfig {
        GameConfig::new(self.point(k), self.background.clone())
    }
}

/// Blocks `{0..b-1}` and `{b..2b-1}`; `p(Y = 1 | x)` is a random function of
/// the first block bounded away from 0 and 1.
pub fn planted_blocks(block: usize, seed: u64) -> PlantedBlocks {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let posterior: Vec<f64> = (0..1usize << block)
        .map(|_| rng.random_range(0.05..0.95))
        .collect();
    let n = 2 * block;
    let oracle = LookupOracle::tabulate(n, 2, 2, |key| {
        let code = key[..block]
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, &b)| acc | ((b as usize) << i));
        let p = posterior[code];
        vec![1.0 - p, p]
    })
    .expect("valid table");
    PlantedBlocks {
        oracle: Arc::new(oracle),
        background: Arc::new(binary_domain(n)),
        blocks: [(0..block).collect(), (block..n).collect()],
    }
}

/// Softmax model with standard normal weights scaled by `scale` and zero bias.
pub fn random_linear_softmax(
    n_features: usize,
    classes: usize,
    scale: f64,
    seed: u64,
) -> LinearSoftmax {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = (0..classes)
        .map(|_| {
            (0..n_features)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    scale * z
                })
                .collect()
        })
        .collect();
    LinearSoftmax::new(weights, vec![0.0; classes]).expect("finite weights")
}

/// `rows` standard normal vectors of width `n`.
pub fn gaussian_dataset(rows: usize, n: usize, seed: u64) -> BackgroundDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    BackgroundDataset::from_rows(data).expect("non-empty dataset")
}

/// Five standard normal features where features 0 and 1 have population
/// correlation `rho` and all other pairs are independent.
pub fn planted_correlation_dataset(rows: usize, rho: f64, seed: u64) -> Result<BackgroundDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows)
        .map(|_| {
            let z: Vec<f64> = (0..5).map(|_| StandardNormal.sample(&mut rng)).collect();
            vec![
                z[0],
                rho * z[0] + (1.0 - rho * rho).sqrt() * z[1],
                z[2],
                z[3],
                z[4],
            ]
        })
        .collect();
    BackgroundDataset::from_rows(data)
}

/// Two disjoint unit-weight cliques on `{0..size-1}` and `{size..2size-1}`.
pub fn two_cliques(size: usize) -> FeatureGraph {
    FeatureGraph::from_fn(
        2 * size,
        |i, j| {
            if (i < size) == (j < size) {
                1.0
            } else {
                0.0
            }
        },
    )
    .expect("finite weights")
}
