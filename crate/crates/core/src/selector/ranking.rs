use serde::{Deserialize, Serialize};

use crate::engine::{CellList, EngineConfig};
use crate::error::{Error, Result};
use crate::model::{ClassPriors, FeatureTable};

use super::argmin_with_ties;

/// Scores a feature on its own, without regard to any other feature.
pub trait RankingCriterion: Send + Sync {
    fn name(&self) -> &'static str;

    /// One score per table feature.
    fn scores(&self, table: &FeatureTable, priors: ClassPriors, config: &EngineConfig) -> Result<Vec<f64>>;

    fn higher_is_better(&self) -> bool;
}

/// Error of the classifier that uses only this feature.
#[derive(Debug, Clone, Copy, Default)]
pub struct SingleFeatureError;

impl RankingCriterion for SingleFeatureError {
    fn name(&self) -> &'static str {
        "error"
    }

    fn scores(&self, table: &FeatureTable, priors: ClassPriors, config: &EngineConfig) -> Result<Vec<f64>> {
        let root = CellList::from_priors(priors, config)?;
        table
            .features()
            .iter()
            .map(|f| Ok(root.expand(f.p_pos, f.p_neg, config)?.evaluate_error().error))
            .collect()
    }

    fn higher_is_better(&self) -> bool {
        false
    }
}

/// `|P(x=1|pos) − P(x=1|neg)|`
#[derive(Debug, Clone, Copy, Default)]
pub struct AbsoluteDifference;

impl RankingCriterion for AbsoluteDifference {
    fn name(&self) -> &'static str {
        "absdiff"
    }

    fn scores(&self, table: &FeatureTable, _: ClassPriors, _: &EngineConfig) -> Result<Vec<f64>> {
        Ok(table.features().iter().map(|f| (f.p_pos - f.p_neg).abs()).collect())
    }

    fn higher_is_better(&self) -> bool {
        true
    }
}

type CriterionFactory = fn() -> Box<dyn RankingCriterion>;

const CRITERIA: &[(&str, CriterionFactory)] = &[
    ("error", || Box::new(SingleFeatureError)),
    ("absdiff", || Box::new(AbsoluteDifference)),
];

pub fn criterion_by_name(name: &str) -> Result<Box<dyn RankingCriterion>> {
    CRITERIA
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, make)| make())
        .ok_or_else(|| Error::UnknownStrategy {
            kind: "ranking criterion",
            name: name.to_string(),
            known: CRITERIA.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", "),
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub index: usize,
    pub score: f64,
}

/// Features ordered best first; ties (within the shared tolerance) go to the
/// lower table index.
pub fn rank_individual(
    table: &FeatureTable,
    priors: ClassPriors,
    criterion: &dyn RankingCriterion,
    config: &EngineConfig,
) -> Result<Vec<RankedFeature>> {
    let scores = criterion.scores(table, priors, config)?;
    let sign = if criterion.higher_is_better() { -1.0 } else { 1.0 };
    let mut remaining: Vec<usize> = (0..scores.len()).collect();
    let mut out = Vec::with_capacity(scores.len());
    while !remaining.is_empty() {
        let keys: Vec<f64> = remaining.iter().map(|&i| sign * scores[i]).collect();
        let pos = argmin_with_ties(&keys).expect("non-empty");
        let index = remaining.remove(pos);
        out.push(RankedFeature {
            index,
            score: scores[index],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_features() -> FeatureTable {
        FeatureTable::from_triples([("x1", 0.3, 0.1), ("x2", 0.4, 0.6), ("x3", 0.8, 0.7)]).unwrap()
    }

    #[test]
    fn single_error_ranking() {
        let r = rank_individual(&three_features(), ClassPriors::equal(), &SingleFeatureError, &EngineConfig::default()).unwrap();
        let idx: Vec<_> = r.iter().map(|x| x.index).collect();
        assert_eq!(idx, vec![0, 1, 2]);
        for (got, want) in r.iter().zip([0.40, 0.40, 0.45]) {
            assert!((got.score - want).abs() < 1e-12);
        }
    }

    #[test]
    fn absdiff_ranking() {
        let r = rank_individual(&three_features(), ClassPriors::equal(), &AbsoluteDifference, &EngineConfig::default()).unwrap();
        let idx: Vec<_> = r.iter().map(|x| x.index).collect();
        assert_eq!(idx, vec![0, 1, 2]);
        assert!((r[2].score - 0.1).abs() < 1e-12);
    }

    #[test]
    fn uninformative_features_tie() {
        let t = FeatureTable::from_triples([("a", 0.2, 0.2), ("b", 0.7, 0.7), ("c", 0.5, 0.5)]).unwrap();
        let pr = ClassPriors::new(0.4, 0.6).unwrap();
        for crit in [criterion_by_name("error").unwrap(), criterion_by_name("absdiff").unwrap()] {
            let r = rank_individual(&t, pr, crit.as_ref(), &EngineConfig::default()).unwrap();
            assert_eq!(r.iter().map(|x| x.index).collect::<Vec<_>>(), vec![0, 1, 2]);
            let first = r[0].score;
            assert!(r.iter().all(|x| (x.score - first).abs() < 1e-12));
        }
    }

    #[test]
    fn unknown_criterion() {
        let err = criterion_by_name("gini").err().unwrap();
        assert!(err.to_string().contains("error, absdiff"));
    }
}
