//! Black-box classifiers exposed as probability oracles.
//!
//! Every oracle maps an instance to a probability vector over `n_classes`
//! labels. [`PredictionOracle::predict_batch`] validates every reply, so
//! downstream code can rely on well-formed distributions regardless of the
//! oracle kind.

mod subprocess;

use std::collections::HashMap;
use std::fmt;

pub use subprocess::{format_request, parse_handshake, parse_reply, Handshake, SubprocessOracle};

use crate::data::Instance;
use crate::error::{Error, OracleFailure, Result};

/// Tolerance on `|Σ p - 1|` for an oracle reply.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    OrGate,
    LinearSoftmax,
    LookupTable,
    Subprocess,
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleKind::OrGate => "or-gate",
            OracleKind::LinearSoftmax => "linear-softmax",
            OracleKind::LookupTable => "lookup-table",
            OracleKind::Subprocess => "subprocess",
        })
    }
}

pub trait PredictionOracle: Send + Sync {
    fn n_features(&self) -> usize;

    fn n_classes(&self) -> usize;

    fn kind(&self) -> OracleKind;

    /// Whether batches may be submitted from several threads at once.
    fn concurrent_safe(&self) -> bool {
        true
    }

    /// Unchecked predictions, one vector per instance in order.
    fn predict_raw(&self, batch: &[Instance]) -> Result<Vec<Vec<f64>>>;

    /// Predicts a batch and enforces the probability contract on the reply.
    fn predict_batch(&self, batch: &[Instance]) -> Result<Vec<Vec<f64>>> {
        for x in batch {
            if x.len() != self.n_features() {
                return Err(Error::SizeMismatch {
                    what: "oracle input",
                    expected: self.n_features(),
                    found: x.len(),
                });
            }
        }
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let out = self.predict_raw(batch)?;
        validate_batch(&out, batch.len(), self.n_classes())?;
        Ok(out)
    }

    fn predict(&self, x: &Instance) -> Result<Vec<f64>> {
        Ok(self.predict_batch(std::slice::from_ref(x))?.remove(0))
    }
}

fn validate_batch(out: &[Vec<f64>], expected: usize, n_classes: usize) -> Result<()> {
    if out.len() != expected {
        return Err(OracleFailure::BatchLength {
            expected,
            found: out.len(),
        }
        .into());
    }
    for (index, p) in out.iter().enumerate() {
        if p.len() != n_classes {
            return Err(OracleFailure::Shape {
                index,
                expected: n_classes,
                found: p.len(),
            }
            .into());
        }
        check_probabilities(p).map_err(|reason| OracleFailure::InvalidProbability {
            index,
            probs: p.clone(),
            reason,
        })?;
    }
    Ok(())
}

/// Checks non-negativity, finiteness and normalization of a distribution.
pub fn check_probabilities(p: &[f64]) -> std::result::Result<(), String> {
    if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(format!("entry {x} is negative or not finite"));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
        return Err(format!("entries sum to {sum}"));
    }
    Ok(())
}

impl<O: PredictionOracle + ?Sized> PredictionOracle for Box<O> {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }
    fn n_classes(&self) -> usize {
        (**self).n_classes()
    }
    fn kind(&self) -> OracleKind {
        (**self).kind()
    }
    fn concurrent_safe(&self) -> bool {
        (**self).concurrent_safe()
    }
    fn predict_raw(&self, batch: &[Instance]) -> Result<Vec<Vec<f64>>> {
        (**self).predict_raw(batch)
    }
}

/// Two binary inputs, `p(Y = 1 | x) = x_1 OR x_2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct OrGate;

impl PredictionOracle for OrGate {
    fn n_features(&self) -> usize {
        2
    }

    fn n_classes(&self) -> usize {
        2
    }

    fn kind(&self) -> OracleKind {
        OracleKind::OrGate
    }

    fn predict_raw(&self, batch: &[Instance]) -> Result<Vec<Vec<f64>>> {
        Ok(batch
            .iter()
            .map(|x| {
                if x[0] > 0.5 || x[1] > 0.5 {
                    vec![0.0, 1.0]
                } else {
                    vec![1.0, 0.0]
                }
            })
            .collect())
    }
}

/// Multinomial logistic model: `softmax(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSoftmax {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl LinearSoftmax {
    /// `weights` has one row per class.
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::invalid("a classifier needs at least two classes"));
        }
        if bias.len() != weights.len() {
            return Err(Error::SizeMismatch {
                what: "softmax bias",
                expected: weights.len(),
                found: bias.len(),
            });
        }
        let width = weights[0].len();
        if let Some(row) = weights.iter().find(|r| r.len() != width) {
            return Err(Error::SizeMismatch {
                what: "softmax weight row",
                expected: width,
                found: row.len(),
            });
        }
        if weights
            .iter()
            .flatten()
            .chain(&bias)
            .any(|w| !w.is_finite())
        {
            return Err(Error::invalid("softmax parameters must be finite"));
        }
        Ok(Self { weights, bias })
    }

    pub fn zeros(n_features: usize, n_classes: usize) -> Self {
        Self {
            weights: vec![vec![0.0; n_features]; n_classes],
            bias: vec![0.0; n_classes],
        }
    }

    pub fn logits(&self, x: &Instance) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x.values()).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl PredictionOracle for LinearSoftmax {
    fn n_features(&self) -> usize {
        self.weights[0].len()
    }

    fn n_classes(&self) -> usize {
        self.weights.len()
    }

    fn kind(&self) -> OracleKind {
        OracleKind::LinearSoftmax
    }

    fn predict_raw(&self, batch: &[Instance]) -> Result<Vec<Vec<f64>>> {
        Ok(batch.iter().map(|x| softmax(&self.logits(x))).collect())
    }
}

/// Exact lookup over an integer-coded discrete domain.
#[derive(Debug, Clone)]
pub struct LookupOracle {
    n_features: usize,
    n_classes: usize,
    table: HashMap<Vec<i64>, Vec<f64>>,
}

/// Coordinates further than this from an integer are outside every domain.
const DOMAIN_EPS: f64 = 1e-9;

impl LookupOracle {
    pub fn new(
        n_features: usize,
        n_classes: usize,
        table: HashMap<Vec<i64>, Vec<f64>>,
    ) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::invalid("a classifier needs at least two classes"));
        }
        if table.is_empty() {
            return Err(Error::invalid("lookup table is empty"));
        }
        for (key, p) in &table {
            if key.len() != n_features {
                return Err(Error::SizeMismatch {
                    what: "lookup key",
                    expected: n_features,
                    found: key.len(),
                });
            }
            if p.len() != n_classes {
                return Err(Error::SizeMismatch {
                    what: "lookup probability vector",
                    expected: n_classes,
                    found: p.len(),
                });
            }
            check_probabilities(p)
                .map_err(|r| Error::invalid(format!("lookup entry {key:?}: {r}")))?;
        }
        Ok(Self {
            n_features,
            n_classes,
            table,
        })
    }

    /// Tabulates `f` over every point of `{0..cardinality}^n_features`.
    pub fn tabulate(
        n_features: usize,
        cardinality: i64,
        n_classes: usize,
        mut f: impl FnMut(&[i64]) -> Vec<f64>,
    ) -> Result<Self> {
        let mut table = HashMap::new();
        let mut key = vec![0i64; n_features];
        loop {
            table.insert(key.clone(), f(&key));
            let mut i = 0;
            loop {
                if i == n_features {
                    return Self::new(n_features, n_classes, table);
                }
                key[i] += 1;
                if key[i] < cardinality {
                    break;
                }
                key[i] = 0;
                i += 1;
            }
        }
    }

    fn key(x: &Instance) -> Option<Vec<i64>> {
        x.values()
            .iter()
            .map(|&v| {
                let r = v.round();
                ((v - r).abs() <= DOMAIN_EPS && r.abs() < 9.0e15).then_some(r as i64)
            })
            .collect()
    }
}

impl PredictionOracle for LookupOracle {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn kind(&self) -> OracleKind {
        OracleKind::LookupTable
    }

    fn predict_raw(&self, batch: &[Instance]) -> Result<Vec<Vec<f64>>> {
        batch
            .iter()
            .map(|x| {
                Self::key(x)
                    .and_then(|k| self.table.get(&k).cloned())
                    .ok_or_else(|| {
                        OracleFailure::OutsideDomain {
                            instance: x.values().to_vec(),
                        }
                        .into()
                    })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(v: &[f64]) -> Instance {
        Instance::new(v.to_vec()).unwrap()
    }

    fn or_domain() -> Vec<Instance> {
        [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]
            .iter()
            .map(|v| inst(v))
            .collect()
    }

    #[test]
    fn or_gate_truth_table() {
        assert_eq!(OrGate.predict(&inst(&[1.0, 1.0])).unwrap(), vec![0.0, 1.0]);
        assert_eq!(OrGate.predict(&inst(&[0.0, 0.0])).unwrap(), vec![1.0, 0.0]);
        assert!(OrGate.predict(&inst(&[1.0])).is_err());
    }

    #[test]
    fn zero_softmax_is_uniform() {
        let m = LinearSoftmax::zeros(4, 3);
        let p = m.predict(&inst(&[3.0, -1.0, 2.0, 7.0])).unwrap();
        for x in p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let m = LinearSoftmax::new(vec![vec![1000.0], vec![-1000.0]], vec![0.0, 0.0]).unwrap();
        let p = m.predict(&inst(&[1.0])).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn lookup_or_table_matches_builtin() {
        let table = LookupOracle::tabulate(2, 2, 2, |k| {
            if k[0] == 1 || k[1] == 1 {
                vec![0.0, 1.0]
            } else {
                vec![1.0, 0.0]
            }
        })
        .unwrap();
        let domain = or_domain();
        assert_eq!(
            table.predict_batch(&domain).unwrap(),
            OrGate.predict_batch(&domain).unwrap()
        );
    }

    #[test]
    fn single_entry_domain_is_constant() {
        let t = LookupOracle::tabulate(3, 1, 2, |_| vec![0.3, 0.7]).unwrap();
        assert_eq!(t.predict(&inst(&[0.0, 0.0, 0.0])).unwrap(), vec![0.3, 0.7]);
        let err = t.predict(&inst(&[0.0, 1.0, 0.0])).unwrap_err();
        assert!(matches!(
            err,
            Error::Oracle(OracleFailure::OutsideDomain { .. })
        ));
        assert!(t.predict(&inst(&[0.0, 0.5, 0.0])).is_err());
    }

    #[test]
    fn planted_table_ignores_second_block() {
        let t = LookupOracle::tabulate(4, 2, 2, |k| {
            let p = 0.2 + 0.3 * (k[0] as f64) + 0.25 * (k[1] as f64);
            vec![1.0 - p, p]
        })
        .unwrap();
        for a in 0..4 {
            let block1 = [(a & 1) as f64, (a >> 1) as f64];
            let base = t.predict(&inst(&[block1[0], block1[1], 0.0, 0.0])).unwrap();
            for b in 1..4 {
                let x = inst(&[block1[0], block1[1], (b & 1) as f64, (b >> 1) as f64]);
                assert_eq!(t.predict(&x).unwrap(), base);
            }
        }
    }

    struct Broken(Vec<f64>);

    impl PredictionOracle for Broken {
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
            Ok(batch.iter().map(|_| self.0.clone()).collect())
        }
    }

    #[test]
    fn invalid_replies_name_the_instance() {
        let batch = vec![inst(&[0.0]), inst(&[1.0])];
        let err = Broken(vec![0.5, 0.6]).predict_batch(&batch).unwrap_err();
        assert!(matches!(
            err,
            Error::Oracle(OracleFailure::InvalidProbability { index: 0, .. })
        ));
        let err = Broken(vec![-0.1, 1.1]).predict_batch(&batch).unwrap_err();
        assert!(err.to_string().contains("negative"));
        let err = Broken(vec![0.2, 0.3, 0.5])
            .predict_batch(&batch)
            .unwrap_err();
        assert!(matches!(
            err,
            Error::Oracle(OracleFailure::Shape { found: 3, .. })
        ));
    }

    #[test]
    fn batch_decomposition_invariance() {
        let m = LinearSoftmax::new(
            vec![vec![0.3, -1.2], vec![0.1, 0.4], vec![-0.7, 0.2]],
            vec![0.05, -0.1, 0.0],
        )
        .unwrap();
        let xs: Vec<Instance> = (0..7)
            .map(|i| inst(&[i as f64 * 0.3, 1.0 - i as f64]))
            .collect();
        let whole = m.predict_batch(&xs).unwrap();
        let mut parts = m.predict_batch(&xs[..3]).unwrap();
        parts.extend(m.predict_batch(&xs[3..]).unwrap());
        assert_eq!(whole, parts);
    }
}
