//! Feature subset selection over the exact error criterion.

mod exhaustive;
mod forced;
pub mod pathology;
mod ranking;
pub mod registry;
mod sfs;

use serde::{Deserialize, Serialize};

use crate::engine::{sensitivity_specificity, ErrorBreakdown};
use crate::error::{Error, Result};
use crate::model::{ClassPriors, FeatureTable};

pub use exhaustive::{binomial, exhaustive_best_subset, ExhaustiveBudget, SubsetResult};
pub use forced::{select_among_nonimproving, Candidate};
pub use ranking::{criterion_by_name, rank_individual, AbsoluteDifference, RankedFeature, RankingCriterion, SingleFeatureError};
pub use sfs::sfs_select;

/// Errors closer than this are treated as equal; the lower table index wins.
pub const TIE_TOL: f64 = 1e-12;

/// A reduction at or below this counts as no reduction.
pub const REDUCTION_TOL: f64 = 1e-12;

/// Position of the entry that wins under "smallest value, ties to the
/// earliest position", where values within [`TIE_TOL`] of the minimum tie.
pub(crate) fn argmin_with_ties(values: &[f64]) -> Option<usize> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    values.iter().position(|&v| v <= min + TIE_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ReachedD,
    ReachedErrorTarget,
    ExhaustedFeatures,
}

/// When forward selection stops.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StoppingRule {
    pub target_count: Option<usize>,
    pub target_error: Option<f64>,
    /// Only produces a warning when a step's reduction falls below it;
    /// reductions are not monotone so it never stops the search.
    pub min_reduction: Option<f64>,
}

impl StoppingRule {
    pub fn count(d: usize) -> Self {
        Self {
            target_count: Some(d),
            ..Self::default()
        }
    }

    pub fn error(target: f64) -> Self {
        Self {
            target_error: Some(target),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_count.is_none() && self.target_error.is_none() {
            return Err(Error::InvalidConfig("stopping rule needs a feature count or an error target".into()));
        }
        if self.target_count == Some(0) {
            return Err(Error::InvalidConfig("feature count must be at least 1".into()));
        }
        if let Some(e) = self.target_error {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::InvalidConfig(format!("target error {e} must be in [0,1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub feature_index: usize,
    pub feature_name: String,
    pub cumulative_error: f64,
    pub false_positive: f64,
    pub false_negative: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    /// Previous error minus this step's error.
    pub reduction: f64,
    /// Chosen among candidates none of which reduced the error.
    pub forced: bool,
    /// Error mass dropped by thresholded pruning up to this step.
    #[serde(default)]
    pub pruned_error_bound: f64,
}

impl SelectionStep {
    pub fn breakdown(&self) -> ErrorBreakdown {
        ErrorBreakdown {
            error: self.cumulative_error,
            false_positive: self.false_positive,
            false_negative: self.false_negative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub steps: Vec<SelectionStep>,
    pub priors: ClassPriors,
    /// Error of the empty set.
    pub initial_error: ErrorBreakdown,
    pub stop_reason: StopReason,
}

impl SelectionTrace {
    pub fn selected(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.feature_index).collect()
    }

    pub fn final_error(&self) -> ErrorBreakdown {
        self.steps.last().map_or(self.initial_error, SelectionStep::breakdown)
    }

    pub fn reductions(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reduction).collect()
    }
}

pub(crate) fn make_step(
    table: &FeatureTable,
    priors: ClassPriors,
    index: usize,
    previous: f64,
    e: ErrorBreakdown,
    forced: bool,
    pruned_error_bound: f64,
) -> Result<SelectionStep> {
    let ss = sensitivity_specificity(&e, priors)?;
    Ok(SelectionStep {
        feature_index: index,
        feature_name: table.features()[index].name.clone(),
        cumulative_error: e.error,
        false_positive: e.false_positive,
        false_negative: e.false_negative,
        sensitivity: ss.sensitivity,
        specificity: ss.specificity,
        reduction: previous - e.error,
        forced,
        pruned_error_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmin_prefers_earliest_within_tolerance() {
        assert_eq!(argmin_with_ties(&[0.4, 0.4 - 1e-14, 0.5]), Some(0));
        assert_eq!(argmin_with_ties(&[0.4, 0.39, 0.39]), Some(1));
        assert_eq!(argmin_with_ties(&[]), None);
    }

    #[test]
    fn stopping_rule_needs_a_target() {
        assert!(StoppingRule::default().validate().is_err());
        assert!(StoppingRule::count(0).validate().is_err());
        assert!(StoppingRule::count(3).validate().is_ok());
        assert!(StoppingRule::error(0.01).validate().is_ok());
        assert!(StoppingRule::error(1.5).validate().is_err());
    }
}
