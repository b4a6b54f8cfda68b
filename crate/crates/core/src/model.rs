//! Probability-table data model.
//!
//! The whole problem description is a list of binary features, each with the
//! probability of being present in the positive class (the disease of
//! interest) and in the negative class (everything else), plus the two
//! class priors.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PRIOR_SUM_TOL: f64 = 1e-12;

/// Prior probabilities of the positive and negative class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPriors")]
pub struct ClassPriors {
    positive: f64,
    negative: f64,
}

#[derive(Deserialize)]
struct RawPriors {
    positive: f64,
    negative: f64,
}

impl TryFrom<RawPriors> for ClassPriors {
    type Error = Error;

    fn try_from(raw: RawPriors) -> Result<Self> {
        Self::new(raw.positive, raw.negative)
    }
}

impl ClassPriors {
    pub fn new(positive: f64, negative: f64) -> Result<Self> {
        let in_unit = |p: f64| (0.0..=1.0).contains(&p);
        if !in_unit(positive) || !in_unit(negative) || (positive + negative - 1.0).abs() > PRIOR_SUM_TOL {
            return Err(Error::InvalidPriors(positive, negative));
        }
        Ok(Self { positive, negative })
    }

    pub fn equal() -> Self {
        Self {
            positive: 0.5,
            negative: 0.5,
        }
    }

    /// P(positive class)
    pub fn positive(&self) -> f64 {
        self.positive
    }

    /// P(negative class)
    pub fn negative(&self) -> f64 {
        self.negative
    }
}

impl Default for ClassPriors {
    fn default() -> Self {
        Self::equal()
    }
}

/// One binary feature with its class-conditional probabilities of being 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    /// P(x = 1 | positive class)
    pub p_pos: f64,
    /// P(x = 1 | negative class)
    pub p_neg: f64,
}

impl Feature {
    pub fn new(name: impl Into<String>, p_pos: f64, p_neg: f64) -> Self {
        Self {
            name: name.into(),
            p_pos,
            p_neg,
        }
    }
}

pub(crate) fn check_probability(feature: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::ProbabilityOutOfRange {
            feature: feature.to_string(),
            value,
        })
    }
}

/// Validated, ordered table of features. Indices into the table are the
/// feature identities used everywhere else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Feature>", into = "Vec<Feature>")]
pub struct FeatureTable {
    features: Vec<Feature>,
}

impl FeatureTable {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyTable);
        }
        let mut seen = HashSet::with_capacity(features.len());
        for (row, f) in features.iter().enumerate() {
            if f.name.trim().is_empty() {
                return Err(Error::EmptyFeatureName(row));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::DuplicateFeature(f.name.clone()));
            }
            check_probability(&f.name, f.p_pos)?;
            check_probability(&f.name, f.p_neg)?;
        }
        Ok(Self { features })
    }

    /// Convenience constructor from `(name, p_pos, p_neg)` triples.
    pub fn from_triples<S: Into<String>>(rows: impl IntoIterator<Item = (S, f64, f64)>) -> Result<Self> {
        Self::new(rows.into_iter().map(|(n, p, q)| Feature::new(n, p, q)).collect())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn get(&self, index: usize) -> Result<&Feature> {
        self.features.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.features.len(),
        })
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    /// Checks that `subset` holds distinct, in-range indices.
    pub fn validate_subset(&self, subset: &[usize]) -> Result<()> {
        let mut seen = HashSet::with_capacity(subset.len());
        for &i in subset {
            self.get(i)?;
            if !seen.insert(i) {
                return Err(Error::DuplicateIndex(i));
            }
        }
        Ok(())
    }

    /// Same table with every probability mapped through `f`.
    pub fn map_probabilities(&self, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        Self::new(
            self.features
                .iter()
                .map(|x| Feature::new(x.name.clone(), f(x.p_pos), f(x.p_neg)))
                .collect(),
        )
    }

    /// Pulls extreme estimates into `[eps, 1 - eps]`.
    pub fn clamped(&self, eps: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&eps) {
            return Err(Error::InvalidConfig(format!("clamp epsilon {eps} must be in [0, 0.5)")));
        }
        self.map_probabilities(|p| p.clamp(eps, 1.0 - eps))
    }
}

impl TryFrom<Vec<Feature>> for FeatureTable {
    type Error = Error;

    fn try_from(features: Vec<Feature>) -> Result<Self> {
        Self::new(features)
    }
}

impl From<FeatureTable> for Vec<Feature> {
    fn from(t: FeatureTable) -> Self {
        t.features
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn priors_must_sum_to_one() {
        assert!(ClassPriors::new(0.3, 0.7).is_ok());
        assert!(ClassPriors::new(1.0, 0.0).is_ok());
        assert_eq!(ClassPriors::new(0.3, 0.6), Err(Error::InvalidPriors(0.3, 0.6)));
        assert!(ClassPriors::new(-0.1, 1.1).is_err());
        assert!(ClassPriors::new(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn table_validation() {
        assert_eq!(FeatureTable::new(vec![]), Err(Error::EmptyTable));
        let dup = FeatureTable::from_triples([("a", 0.1, 0.2), ("a", 0.3, 0.4)]);
        assert_eq!(dup, Err(Error::DuplicateFeature("a".into())));
        let range = FeatureTable::from_triples([("a", 0.1, 1.2)]);
        assert!(matches!(range, Err(Error::ProbabilityOutOfRange { ref feature, .. }) if feature == "a"));
        assert!(matches!(
            FeatureTable::from_triples([(" ", 0.1, 0.2)]),
            Err(Error::EmptyFeatureName(0))
        ));
    }

    #[test]
    fn subset_validation() {
        let t = FeatureTable::from_triples([("a", 0.1, 0.2), ("b", 0.3, 0.4)]).unwrap();
        assert!(t.validate_subset(&[1, 0]).is_ok());
        assert_eq!(t.validate_subset(&[1, 1]), Err(Error::DuplicateIndex(1)));
        assert_eq!(
            t.validate_subset(&[2]),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        );
    }

    #[test]
    fn clamping() {
        let t = FeatureTable::from_triples([("a", 0.0, 1.0)]).unwrap();
        let c = t.clamped(0.01).unwrap();
        assert_eq!(c.features()[0].p_pos, 0.01);
        assert_eq!(c.features()[0].p_neg, 0.99);
    }
}
