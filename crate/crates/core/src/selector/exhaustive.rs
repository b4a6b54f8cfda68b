use serde::{Deserialize, Serialize};

use crate::engine::{CellList, EngineConfig, ErrorBreakdown};
use crate::error::{Error, Result};
use crate::model::{ClassPriors, FeatureTable};

use super::argmin_with_ties;

/// Upper limit on the number of subsets the exhaustive search may visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExhaustiveBudget {
    pub max_subsets: u64,
}

impl Default for ExhaustiveBudget {
    /// C(20, 6), enough for every size-6 subset of 20 features.
    fn default() -> Self {
        Self { max_subsets: 38_760 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetResult {
    /// Ascending table indices.
    pub subset: Vec<usize>,
    pub error: ErrorBreakdown,
}

/// `n choose k`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Best subset of exactly `d` features by full enumeration. Ties go to the
/// lexicographically smallest index set.
pub fn exhaustive_best_subset(
    table: &FeatureTable,
    priors: ClassPriors,
    d: usize,
    budget: ExhaustiveBudget,
    config: &EngineConfig,
) -> Result<SubsetResult> {
    let n = table.len();
    if d > n {
        return Err(Error::InvalidConfig(format!("cannot choose {d} features from {n}")));
    }
    config.check_depth(d)?;
    let required = binomial(n, d);
    if required > budget.max_subsets as u128 {
        return Err(Error::BudgetExceeded {
            required,
            budget: budget.max_subsets,
        });
    }

    let root = CellList::from_priors(priors, config)?;
    let mut found: Vec<(Vec<usize>, ErrorBreakdown)> = Vec::with_capacity(required as usize);
    let mut prefix = Vec::with_capacity(d);
    enumerate(table, d, 0, &root, &mut prefix, &mut found, config)?;

    let errors: Vec<f64> = found.iter().map(|(_, e)| e.error).collect();
    let best = argmin_with_ties(&errors).expect("at least one subset");
    let (subset, error) = found.swap_remove(best);
    Ok(SubsetResult { subset, error })
}

/// Depth-first walk in lexicographic order, sharing cell lists between
/// subsets with a common prefix.
fn enumerate(
    table: &FeatureTable,
    d: usize,
    start: usize,
    list: &CellList,
    prefix: &mut Vec<usize>,
    out: &mut Vec<(Vec<usize>, ErrorBreakdown)>,
    config: &EngineConfig,
) -> Result<()> {
    if prefix.len() == d {
        out.push((prefix.clone(), list.evaluate_error()));
        return Ok(());
    }
    let need = d - prefix.len();
    for j in start..=table.len() - need {
        let f = &table.features()[j];
        let next = list.expand(f.p_pos, f.p_neg, config)?;
        prefix.push(j);
        enumerate(table, d, j + 1, &next, prefix, out, config)?;
        prefix.pop();
    }
    Ok(())
}
