//! Instances and background datasets.

use crate::error::{Error, Result};
use crate::feature_set::FeatureSet;

/// A single input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance(Vec<f64>);

impl Instance {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "instance value {} at feature {i} is not finite",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for Instance {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Splices `x` and `x_hat`: feature `i` comes from `x` when `i ∈ keep`,
/// otherwise from `x_hat`.
pub fn compose(x: &Instance, x_hat: &Instance, keep: &FeatureSet) -> Result<Instance> {
    if x.len() != x_hat.len() {
        return Err(Error::SizeMismatch {
            what: "composed instance",
            expected: x.len(),
            found: x_hat.len(),
        });
    }
    let values = (0..x.len())
        .map(|i| if keep.contains(i) { x[i] } else { x_hat[i] })
        .collect();
    Ok(Instance(values))
}

/// Instances standing in for the training distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundDataset {
    feature_names: Vec<String>,
    instances: Vec<Instance>,
}

impl BackgroundDataset {
    pub fn new(instances: Vec<Instance>) -> Result<Self> {
        let width = instances.first().map(Instance::len).unwrap_or(0);
        let names = (0..width).map(|i| format!("x{i}")).collect();
        Self::with_names(names, instances)
    }

    pub fn with_names(feature_names: Vec<String>, instances: Vec<Instance>) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::invalid("background dataset is empty"));
        }
        let width = feature_names.len();
        for inst in &instances {
            if inst.len() != width {
                return Err(Error::SizeMismatch {
                    what: "background instance",
                    expected: width,
                    found: inst.len(),
                });
            }
        }
        Ok(Self {
            feature_names,
            instances,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let instances = rows
            .into_iter()
            .map(Instance::new)
            .collect::<Result<Vec<_>>>()?;
        Self::new(instances)
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.instances.iter().map(|x| x[j]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn inst(v: &[f64]) -> Instance {
        Instance::new(v.to_vec()).unwrap()
    }

    #[test]
    fn compose_edge_cases() {
        let x = inst(&[1.0, 1.0]);
        let xh = inst(&[0.0, 0.0]);
        assert_eq!(compose(&x, &xh, &FeatureSet::full(2)).unwrap(), x);
        assert_eq!(compose(&x, &xh, &FeatureSet::empty()).unwrap(), xh);
        assert_eq!(
            compose(&x, &xh, &FeatureSet::singleton(0)).unwrap(),
            inst(&[1.0, 0.0])
        );
        assert!(compose(&x, &inst(&[0.0]), &FeatureSet::empty()).is_err());
    }

    #[test]
    fn dataset_rejects_ragged_rows() {
        assert!(BackgroundDataset::from_rows(vec![]).is_err());
        assert!(BackgroundDataset::from_rows(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(Instance::new(vec![f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn compose_is_a_projection(
            pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3, any::<bool>()), 1..40)
        ) {
            let x = inst(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
            let xh = inst(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
            let keep: FeatureSet = pairs.iter().enumerate().filter(|(_, p)| p.2).map(|(i, _)| i).collect();
            let z = compose(&x, &xh, &keep).unwrap();
            for (i, p) in pairs.iter().enumerate() {
                prop_assert_eq!(z[i], if p.2 { p.0 } else { p.1 });
            }
        }
    }
}
