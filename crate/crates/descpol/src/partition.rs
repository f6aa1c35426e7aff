//! Feature-space partitioning: the conditions a descriptive state is built over.
//!
//! Each feature of an item is mapped to an interval index by a
//! [`PartitionScheme`]. A tuple of per-feature indices is a [`Condition`],
//! the cell of feature space that the descriptive state and action refer to.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How one feature is partitioned into bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturePartition {
    /// H equal-width intervals over [0,1]; half-open except the last.
    Uniform(usize),
    /// Interior boundaries b_1 < ... < b_{H-1} in (0,1); intervals are
    /// [0,b_1), [b_1,b_2), ..., [b_{H-1},1].
    Boundaries(Vec<f64>),
    /// Discrete feature: one declared value per bin, mapped by position.
    Discrete(Vec<f64>),
    /// Discrete feature with many-to-one grouping: each bin lists the raw
    /// values it absorbs (e.g. quantity subsets {0,1,2} and {3,4}).
    DiscreteGroups(Vec<Vec<f64>>),
}

impl FeaturePartition {
    /// Number of bins H_k.
    pub fn bins(&self) -> usize {
        match self {
            FeaturePartition::Uniform(h) => *h,
            FeaturePartition::Boundaries(b) => b.len() + 1,
            FeaturePartition::Discrete(v) => v.len(),
            FeaturePartition::DiscreteGroups(g) => g.len(),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(
            self,
            FeaturePartition::Discrete(_) | FeaturePartition::DiscreteGroups(_)
        )
    }

    fn validate(&self, feature: usize) -> Result<()> {
        match self {
            FeaturePartition::Uniform(h) => {
                if *h == 0 {
                    return Err(Error::InvalidConfig(format!(
                        "feature {feature}: uniform partition needs at least one interval"
                    )));
                }
            }
            FeaturePartition::Boundaries(b) => {
                let mut prev = 0.0;
                for &x in b {
                    if !(x > prev && x < 1.0) {
                        return Err(Error::InvalidConfig(format!(
                            "feature {feature}: boundaries must be strictly increasing in (0,1)"
                        )));
                    }
                    prev = x;
                }
            }
            FeaturePartition::Discrete(v) => {
                if v.is_empty() {
                    return Err(Error::InvalidConfig(format!(
                        "feature {feature}: discrete partition needs at least one value"
                    )));
                }
            }
            FeaturePartition::DiscreteGroups(g) => {
                if g.is_empty() || g.iter().any(|grp| grp.is_empty()) {
                    return Err(Error::InvalidConfig(format!(
                        "feature {feature}: discrete groups must be nonempty"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-feature interval boundaries defining the conditions of the
/// descriptive state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionScheme {
    pub features: Vec<FeaturePartition>,
}

impl PartitionScheme {
    pub fn new(features: Vec<FeaturePartition>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidConfig(
                "scheme needs at least one feature".into(),
            ));
        }
        for (k, f) in features.iter().enumerate() {
            f.validate(k)?;
        }
        Ok(PartitionScheme { features })
    }

    /// Uniform-dyadic scheme: every one of `num_features` continuous features
    /// split into 2^b equal intervals of width 2^-b.
    pub fn uniform(b: u32, num_features: usize) -> Self {
        let h = 1usize << b;
        PartitionScheme {
            features: vec![FeaturePartition::Uniform(h); num_features],
        }
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    /// Bin counts (H_1, ..., H_K).
    pub fn shape(&self) -> Vec<usize> {
        self.features.iter().map(|f| f.bins()).collect()
    }

    /// Total number of conditions, prod_k H_k.
    pub fn num_conditions(&self) -> usize {
        self.features.iter().map(|f| f.bins()).product()
    }

    /// 1-based interval index of `value` for feature `feature_index`.
    ///
    /// Continuous intervals are half-open [lo, hi) except the last, which is
    /// closed at 1, so every value in [0,1] maps to exactly one bin.
    pub fn bin_index(&self, feature_index: usize, value: f64) -> Result<usize> {
        let part = self
            .features
            .get(feature_index)
            .ok_or(Error::BadFeatureIndex {
                index: feature_index,
                count: self.features.len(),
            })?;
        match part {
            FeaturePartition::Uniform(h) => {
                check_domain(feature_index, value)?;
                let idx = ((value * *h as f64).floor() as usize).min(h - 1);
                Ok(idx + 1)
            }
            FeaturePartition::Boundaries(b) => {
                check_domain(feature_index, value)?;
                let idx = b.iter().take_while(|&&x| value >= x).count();
                Ok(idx + 1)
            }
            FeaturePartition::Discrete(values) => values
                .iter()
                .position(|&v| discrete_eq(v, value))
                .map(|i| i + 1)
                .ok_or(Error::UnknownDiscreteValue {
                    feature: feature_index,
                    value,
                }),
            FeaturePartition::DiscreteGroups(groups) => groups
                .iter()
                .position(|grp| grp.iter().any(|&v| discrete_eq(v, value)))
                .map(|i| i + 1)
                .ok_or(Error::UnknownDiscreteValue {
                    feature: feature_index,
                    value,
                }),
        }
    }

    /// Interval [lo, hi] of a continuous feature's bin (1-based index).
    /// Discrete features have no intervals.
    pub fn interval(&self, feature_index: usize, bin: usize) -> Option<(f64, f64)> {
        match self.features.get(feature_index)? {
            FeaturePartition::Uniform(h) => {
                let w = 1.0 / *h as f64;
                Some(((bin - 1) as f64 * w, (bin as f64 * w).min(1.0)))
            }
            FeaturePartition::Boundaries(b) => {
                let lo = if bin == 1 { 0.0 } else { b[bin - 2] };
                let hi = if bin == b.len() + 1 { 1.0 } else { b[bin - 1] };
                Some((lo, hi))
            }
            _ => None,
        }
    }
}

fn check_domain(feature: usize, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::OutOfDomain { feature, value });
    }
    Ok(())
}

fn discrete_eq(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

/// Tuple of per-feature interval indices, 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Condition(pub Vec<usize>);

impl Condition {
    /// Row-major flat index (0-based, last feature varies fastest).
    pub fn flat_index(&self, shape: &[usize]) -> usize {
        debug_assert_eq!(self.0.len(), shape.len());
        let mut idx = 0;
        for (h, &dim) in self.0.iter().zip(shape) {
            debug_assert!((1..=dim).contains(h));
            idx = idx * dim + (h - 1);
        }
        idx
    }

    /// Inverse of [`Condition::flat_index`].
    pub fn from_flat(mut idx: usize, shape: &[usize]) -> Self {
        let mut out = vec![0usize; shape.len()];
        for (slot, &dim) in out.iter_mut().zip(shape).rev() {
            *slot = idx % dim + 1;
            idx /= dim;
        }
        Condition(out)
    }
}
