//! Named, interchangeable subset selection strategies.
//!
//! Every strategy produces a [`SelectionTrace`] so that reports, scatter
//! output and comparisons treat them alike. Strategies that do not build
//! the set greedily list their features in the order they report them and
//! fold the cumulative error in that order.

use crate::engine::{prior_error, CellList, EngineConfig};
use crate::error::{Error, Result};
use crate::model::{ClassPriors, FeatureTable};

use super::{
    exhaustive_best_subset, make_step, rank_individual, sfs_select, AbsoluteDifference, ExhaustiveBudget,
    RankingCriterion, SelectionTrace, SingleFeatureError, StopReason, StoppingRule,
};

pub trait SubsetSelector: Send + Sync {
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    fn select(
        &self,
        table: &FeatureTable,
        priors: ClassPriors,
        stop: &StoppingRule,
        config: &EngineConfig,
    ) -> Result<SelectionTrace>;
}

/// Sequential forward selection.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sfs;

impl SubsetSelector for Sfs {
    fn name(&self) -> &'static str {
        "sfs"
    }

    fn description(&self) -> &'static str {
        "sequential forward selection on the exact error"
    }

    fn select(&self, table: &FeatureTable, priors: ClassPriors, stop: &StoppingRule, config: &EngineConfig) -> Result<SelectionTrace> {
        sfs_select(table, priors, stop, config)
    }
}

/// Best subset of the requested size by enumeration.
#[derive(Debug, Clone, Copy, Default)]
pub struct Exhaustive {
    pub budget: ExhaustiveBudget,
}

impl SubsetSelector for Exhaustive {
    fn name(&self) -> &'static str {
        "exhaustive"
    }

    fn description(&self) -> &'static str {
        "optimal subset of size d by full enumeration (budget-guarded)"
    }

    fn select(&self, table: &FeatureTable, priors: ClassPriors, stop: &StoppingRule, config: &EngineConfig) -> Result<SelectionTrace> {
        let d = required_count(self.name(), stop)?;
        let best = exhaustive_best_subset(table, priors, d, self.budget, config)?;
        fold_trace(table, priors, &best.subset, config)
    }
}

/// The `d` individually best features.
pub struct IndividualBest {
    name: &'static str,
    criterion: Box<dyn RankingCriterion>,
}

impl IndividualBest {
    pub fn new(name: &'static str, criterion: Box<dyn RankingCriterion>) -> Self {
        Self { name, criterion }
    }
}

impl SubsetSelector for IndividualBest {
    fn name(&self) -> &'static str {
        self.name
    }

    fn description(&self) -> &'static str {
        if self.criterion.higher_is_better() {
            "top d features by absolute probability difference"
        } else {
            "top d features by single-feature error"
        }
    }

    fn select(&self, table: &FeatureTable, priors: ClassPriors, stop: &StoppingRule, config: &EngineConfig) -> Result<SelectionTrace> {
        let d = required_count(self.name, stop)?;
        if d > table.len() {
            return Err(Error::InvalidConfig(format!("cannot choose {d} features from {}", table.len())));
        }
        config.check_depth(d)?;
        let ranked = rank_individual(table, priors, self.criterion.as_ref(), config)?;
        let chosen: Vec<usize> = ranked.iter().take(d).map(|r| r.index).collect();
        fold_trace(table, priors, &chosen, config)
    }
}

fn required_count(name: &str, stop: &StoppingRule) -> Result<usize> {
    stop.validate()?;
    stop.target_count
        .ok_or_else(|| Error::InvalidConfig(format!("strategy `{name}` needs a feature count")))
}

/// Trace of a fixed feature order. No step is flagged forced.
pub fn fold_trace(table: &FeatureTable, priors: ClassPriors, order: &[usize], config: &EngineConfig) -> Result<SelectionTrace> {
    table.validate_subset(order)?;
    config.check_depth(order.len())?;
    let initial = prior_error(priors);
    let mut list = CellList::from_priors(priors, config)?;
    let mut previous = initial.error;
    let mut steps = Vec::with_capacity(order.len());
    for &j in order {
        let f = &table.features()[j];
        list = list.expand(f.p_pos, f.p_neg, config)?;
        let e = list.evaluate_error();
        steps.push(make_step(table, priors, j, previous, e, false, list.pruned_error_bound())?);
        previous = e.error;
    }
    Ok(SelectionTrace {
        steps,
        priors,
        initial_error: initial,
        stop_reason: StopReason::ReachedD,
    })
}

type SelectorFactory = fn() -> Box<dyn SubsetSelector>;

const SELECTORS: &[(&str, SelectorFactory)] = &[
    ("sfs", || Box::new(Sfs)),
    ("exhaustive", || Box::new(Exhaustive::default())),
    ("individual-error", || Box::new(IndividualBest::new("individual-error", Box::new(SingleFeatureError)))),
    ("individual-absdiff", || Box::new(IndividualBest::new("individual-absdiff", Box::new(AbsoluteDifference)))),
];

/// Names of all registered strategies, in registration order.
pub fn selector_names() -> Vec<&'static str> {
    SELECTORS.iter().map(|(n, _)| *n).collect()
}

pub fn selector_by_name(name: &str) -> Result<Box<dyn SubsetSelector>> {
    SELECTORS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, make)| make())
        .ok_or_else(|| Error::UnknownStrategy {
            kind: "selection strategy",
            name: name.to_string(),
            known: selector_names().join(", "),
        })
}
