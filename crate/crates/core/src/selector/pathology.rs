//! Search for small tables on which greedy or individual selection is
//! provably suboptimal, or on which error reductions grow.
//!
//! Candidate tables have three features and two classes with every
//! probability on a regular grid. An instance is reported only when the
//! pathology holds with a margin, using the exhaustive oracle for pair
//! errors and a full forward-selection run for reductions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{error_of_subset, EngineConfig};
use crate::error::{Error, Result};
use crate::model::{ClassPriors, Feature, FeatureTable};

use super::{
    exhaustive_best_subset, rank_individual, sfs_select, ExhaustiveBudget, SelectionTrace, SingleFeatureError,
    StoppingRule, SubsetResult,
};

/// Strict inequalities must hold by at least this much to certify.
pub const CERT_MARGIN: f64 = 1e-9;

const SEARCH_FEATURES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathologyKind {
    /// The individually best feature is not in the best pair.
    BestNotInBestPair,
    /// The two individually best features are not the best pair.
    IndividuallyBestPairNotBestPair,
    /// A forward-selection step reduces the error more than the step before it.
    NonmonotoneReduction,
}

impl PathologyKind {
    pub const ALL: [PathologyKind; 3] = [
        PathologyKind::BestNotInBestPair,
        PathologyKind::IndividuallyBestPairNotBestPair,
        PathologyKind::NonmonotoneReduction,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PathologyKind::BestNotInBestPair => "best_not_in_best_pair",
            PathologyKind::IndividuallyBestPairNotBestPair => "individually_best_pair_not_best_pair",
            PathologyKind::NonmonotoneReduction => "nonmonotone_reduction",
        }
    }

    /// Accepts the snake_case name or the same with dashes.
    pub fn from_name(name: &str) -> Result<Self> {
        let norm = name.replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "pathology",
                name: name.to_string(),
                known: Self::ALL.map(|k| k.name()).join(", "),
            })
    }

    pub fn detector(&self) -> Box<dyn PathologyDetector> {
        match self {
            PathologyKind::BestNotInBestPair => Box::new(BestNotInBestPair),
            PathologyKind::IndividuallyBestPairNotBestPair => Box::new(IndividuallyBestPairNotBestPair),
            PathologyKind::NonmonotoneReduction => Box::new(NonmonotoneReduction),
        }
    }
}

/// Everything the detectors look at, computed once per table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    /// Error of each feature used alone, by table index.
    pub individual_errors: Vec<f64>,
    /// Table indices, individually best first.
    pub individual_order: Vec<usize>,
    /// Error of every pair `(i, j)`, `i < j`, in lexicographic order.
    pub pair_errors: Vec<((usize, usize), f64)>,
    /// Exhaustive best pair; absent for single-feature tables.
    pub best_pair: Option<SubsetResult>,
    /// Forward selection through every feature.
    pub sfs: SelectionTrace,
}

impl Evidence {
    pub fn compute(table: &FeatureTable, priors: ClassPriors, config: &EngineConfig) -> Result<Self> {
        let ranked = rank_individual(table, priors, &SingleFeatureError, config)?;
        let mut individual_errors = vec![0.0; table.len()];
        for r in &ranked {
            individual_errors[r.index] = r.score;
        }
        let n = table.len();
        let mut pair_errors = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                pair_errors.push(((i, j), error_of_subset(table, priors, &[i, j], config)?.error));
            }
        }
        let best_pair = if n >= 2 {
            Some(exhaustive_best_subset(table, priors, 2, ExhaustiveBudget::default(), config)?)
        } else {
            None
        };
        let sfs = sfs_select(table, priors, &StoppingRule::count(n), config)?;
        Ok(Self {
            individual_errors,
            individual_order: ranked.iter().map(|r| r.index).collect(),
            pair_errors,
            best_pair,
            sfs,
        })
    }

    fn pair_error(&self, i: usize, j: usize) -> f64 {
        let key = (i.min(j), i.max(j));
        self.pair_errors
            .iter()
            .find(|(p, _)| *p == key)
            .map(|(_, e)| *e)
            .expect("pair present")
    }

    /// Best pair, provided it beats every other pair by the margin.
    fn unique_best_pair(&self) -> Option<(usize, usize, f64)> {
        let best = self.best_pair.as_ref()?;
        let (i, j) = (best.subset[0], best.subset[1]);
        let e = best.error.error;
        self.pair_errors
            .iter()
            .filter(|(p, _)| *p != (i, j))
            .all(|(_, other)| e < other - CERT_MARGIN)
            .then_some((i, j, e))
    }
}

pub trait PathologyDetector: Send + Sync {
    fn kind(&self) -> PathologyKind;

    fn certify(&self, evidence: &Evidence) -> bool;
}

pub struct BestNotInBestPair;

impl PathologyDetector for BestNotInBestPair {
    fn kind(&self) -> PathologyKind {
        PathologyKind::BestNotInBestPair
    }

    fn certify(&self, ev: &Evidence) -> bool {
        let order = &ev.individual_order;
        if order.len() < 3 {
            return false;
        }
        let e = &ev.individual_errors;
        let best = order[0];
        if e[best] >= e[order[1]] - CERT_MARGIN {
            return false;
        }
        ev.unique_best_pair().is_some_and(|(i, j, _)| best != i && best != j)
    }
}

pub struct IndividuallyBestPairNotBestPair;

impl PathologyDetector for IndividuallyBestPairNotBestPair {
    fn kind(&self) -> PathologyKind {
        PathologyKind::IndividuallyBestPairNotBestPair
    }

    fn certify(&self, ev: &Evidence) -> bool {
        let order = &ev.individual_order;
        if order.len() < 3 {
            return false;
        }
        let e = &ev.individual_errors;
        if e[order[1]] >= e[order[2]] - CERT_MARGIN {
            return false;
        }
        let top_pair = ev.pair_error(order[0], order[1]);
        ev.best_pair
            .as_ref()
            .is_some_and(|b| b.error.error < top_pair - CERT_MARGIN)
    }
}

pub struct NonmonotoneReduction;

impl PathologyDetector for NonmonotoneReduction {
    fn kind(&self) -> PathologyKind {
        PathologyKind::NonmonotoneReduction
    }

    fn certify(&self, ev: &Evidence) -> bool {
        ev.sfs
            .steps
            .windows(2)
            .any(|w| w[1].reduction > w[0].reduction + CERT_MARGIN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Spacing of the probability grid; `1/grid_step` must be an integer.
    pub grid_step: f64,
    /// Number of random grid tables to try.
    pub budget: u64,
    pub seed: u64,
    pub priors: ClassPriors,
    /// Tables checked before the random search, in order.
    #[serde(default)]
    pub seed_instances: Vec<(FeatureTable, ClassPriors)>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            grid_step: 0.05,
            budget: 100_000,
            seed: 0,
            priors: ClassPriors::equal(),
            seed_instances: Vec::new(),
        }
    }
}

impl SearchConfig {
    fn grid_points(&self) -> Result<u32> {
        let m = (1.0 / self.grid_step).round();
        if !(self.grid_step > 0.0 && self.grid_step <= 1.0) || (m * self.grid_step - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "grid step {} must divide 1 evenly",
                self.grid_step
            )));
        }
        Ok(m as u32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "index")]
pub enum InstanceSource {
    SeedInstance(usize),
    Attempt(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathologyInstance {
    pub kind: PathologyKind,
    pub table: FeatureTable,
    pub priors: ClassPriors,
    pub source: InstanceSource,
    pub evidence: Evidence,
}

impl PathologyInstance {
    /// Recomputes the evidence from the table and checks it again.
    pub fn verify(&self, config: &EngineConfig) -> Result<bool> {
        let ev = Evidence::compute(&self.table, self.priors, config)?;
        Ok(self.kind.detector().certify(&ev))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum SearchOutcome {
    Found(Box<PathologyInstance>),
    Exhausted { tried: u64 },
}

/// The random grid table of one attempt. Each attempt owns a ChaCha stream
/// keyed by `(seed, attempt)`.
pub fn grid_table(seed: u64, attempt: u64, grid_points: u32) -> FeatureTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(attempt);
    let m = grid_points as f64;
    let mut draw = || rng.random_range(0..=grid_points) as f64 / m;
    let features = (0..SEARCH_FEATURES)
        .map(|i| {
            let p = draw();
            let q = draw();
            Feature::new(format!("x{}", i + 1), p, q)
        })
        .collect();
    FeatureTable::new(features).expect("grid probabilities are valid")
}

/// First table exhibiting `kind`: seed instances in order, then random grid
/// attempts in attempt order. Attempts run in parallel; the lowest certified
/// attempt wins, so the result does not depend on scheduling.
pub fn find_counterexample(kind: PathologyKind, search: &SearchConfig) -> Result<SearchOutcome> {
    let config = EngineConfig::default();
    let detector = kind.detector();
    let grid = search.grid_points()?;

    for (i, (table, priors)) in search.seed_instances.iter().enumerate() {
        let evidence = Evidence::compute(table, *priors, &config)?;
        if detector.certify(&evidence) {
            return Ok(SearchOutcome::Found(Box::new(PathologyInstance {
                kind,
                table: table.clone(),
                priors: *priors,
                source: InstanceSource::SeedInstance(i),
                evidence,
            })));
        }
    }

    let hit = (0..search.budget).into_par_iter().find_map_first(|attempt| {
        let table = grid_table(search.seed, attempt, grid);
        let evidence = Evidence::compute(&table, search.priors, &config).ok()?;
        detector.certify(&evidence).then_some(PathologyInstance {
            kind,
            table,
            priors: search.priors,
            source: InstanceSource::Attempt(attempt),
            evidence,
        })
    });

    Ok(match hit {
        Some(found) => SearchOutcome::Found(Box::new(found)),
        None => SearchOutcome::Exhausted { tried: search.budget },
    })
}
