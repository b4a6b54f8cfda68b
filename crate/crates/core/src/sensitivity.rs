//! Robustness of the selection under perturbed probability estimates.
//!
//! Every probability in the table is redrawn from a normal distribution
//! centred on the expert estimate and truncated to `[0, 1]`, forward
//! selection is rerun, and the selection positions are accumulated as ranks:
//! the first of `d` selected features scores `d`, the last scores 1 and
//! unselected features score 0.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::EngineConfig;
use crate::error::{Error, Result};
use crate::model::{ClassPriors, FeatureTable};
use crate::selector::{sfs_select, StoppingRule};

/// Normal distribution restricted to `[0, 1]` by resampling.
#[derive(Debug, Clone, Copy)]
pub struct UnitTruncatedNormal {
    mean: f64,
    normal: Option<Normal<f64>>,
}

impl UnitTruncatedNormal {
    pub fn new(mean: f64, sigma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mean) {
            return Err(Error::InvalidConfig(format!("mean {mean} outside [0,1]")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma {sigma} must be finite and non-negative")));
        }
        let normal = if sigma == 0.0 {
            None
        } else {
            Some(Normal::new(mean, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?)
        };
        Ok(Self { mean, normal })
    }
}

impl Distribution<f64> for UnitTruncatedNormal {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let Some(normal) = &self.normal else {
            return self.mean;
        };
        loop {
            let x = normal.sample(rng);
            if (0.0..=1.0).contains(&x) {
                return x;
            }
        }
    }
}

/// Redraws every probability independently around its current value.
pub fn perturb_table<R: Rng + ?Sized>(table: &FeatureTable, sigma: f64, rng: &mut R) -> Result<FeatureTable> {
    if sigma == 0.0 {
        return Ok(table.clone());
    }
    let mut draws = Vec::with_capacity(table.len() * 2);
    for f in table.features() {
        draws.push(UnitTruncatedNormal::new(f.p_pos, sigma)?.sample(rng));
        draws.push(UnitTruncatedNormal::new(f.p_neg, sigma)?.sample(rng));
    }
    let mut it = draws.into_iter();
    table.map_probabilities(|_| it.next().expect("two draws per feature"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub sigma: f64,
    pub runs: u64,
    /// Features selected per run.
    pub d: usize,
    pub seed: u64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            sigma: 0.1,
            runs: 1000,
            d: 10,
            seed: 0,
        }
    }
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma {} must be non-negative", self.sigma)));
        }
        if self.runs == 0 || self.d == 0 {
            return Err(Error::InvalidConfig("runs and d must be at least 1".into()));
        }
        Ok(())
    }
}

/// Random stream of one run: a ChaCha stream keyed by `(seed, run)`.
pub fn run_stream(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Accumulated selection ranks over many runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankTable {
    pub feature_names: Vec<String>,
    pub total_rank: Vec<u64>,
    pub selection_count: Vec<u64>,
    pub runs: u64,
    pub d: usize,
}

impl RankTable {
    pub fn empty(feature_names: Vec<String>, d: usize) -> Self {
        let n = feature_names.len();
        Self {
            feature_names,
            total_rank: vec![0; n],
            selection_count: vec![0; n],
            runs: 0,
            d,
        }
    }

    /// Adds one run; `selected` lists table indices in selection order.
    pub fn add_run(&mut self, selected: &[usize]) {
        for (pos, &j) in selected.iter().enumerate() {
            self.total_rank[j] += (self.d - pos) as u64;
            self.selection_count[j] += 1;
        }
        self.runs += 1;
    }

    /// Feature indices by total rank, highest first; ties to the lower index.
    pub fn ordering(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.total_rank.len()).collect();
        idx.sort_by(|&i, &j| self.total_rank[j].cmp(&self.total_rank[i]).then(i.cmp(&j)));
        idx
    }

    pub fn top(&self, k: usize) -> Vec<usize> {
        let mut o = self.ordering();
        o.truncate(k);
        o
    }

    pub fn rank_sum(&self) -> u64 {
        self.total_rank.iter().sum()
    }
}

/// Runs forward selection on `config.runs` perturbed copies of the table.
pub fn run_sensitivity(
    table: &FeatureTable,
    priors: ClassPriors,
    config: &PerturbationConfig,
    engine: &EngineConfig,
) -> Result<RankTable> {
    config.validate()?;
    if config.d > table.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot select {} features from a table of {}",
            config.d,
            table.len()
        )));
    }
    engine.check_depth(config.d)?;
    let stop = StoppingRule::count(config.d);
    let selections: Vec<Vec<usize>> = (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = run_stream(config.seed, run);
            let perturbed = perturb_table(table, config.sigma, &mut rng)?;
            Ok(sfs_select(&perturbed, priors, &stop, engine)?.selected())
        })
        .collect::<Result<_>>()?;

    let mut ranks = RankTable::empty(table.names().map(str::to_string).collect(), config.d);
    for s in &selections {
        ranks.add_run(s);
    }
    Ok(ranks)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairOverlap {
    pub left: usize,
    pub right: usize,
    pub intersection: usize,
}

/// How much the top-k lists of several rank tables agree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub k: usize,
    /// Top-k feature indices of each table, best first.
    pub top_lists: Vec<Vec<usize>>,
    pub pairwise: Vec<PairOverlap>,
    /// Features in at least one top-k list, ascending index.
    pub union: Vec<usize>,
    /// Top-k of the unperturbed ranking, when one was given.
    pub reference_top: Option<Vec<usize>>,
    /// In some perturbed top-k but not in the reference top-k.
    pub entering: Vec<usize>,
    /// In the reference top-k but missing from at least one perturbed top-k.
    pub dropping: Vec<usize>,
}

pub fn compare_rank_tables(tables: &[RankTable], k: usize, reference: Option<&RankTable>) -> Result<OverlapReport> {
    let names = match (tables.first(), reference) {
        (Some(t), _) => &t.feature_names,
        (None, Some(r)) => &r.feature_names,
        (None, None) => return Err(Error::InvalidConfig("no rank tables to compare".into())),
    };
    if tables.iter().chain(reference).any(|t| &t.feature_names != names) {
        return Err(Error::MismatchedFeatures);
    }
    let top_lists: Vec<Vec<usize>> = tables.iter().map(|t| t.top(k)).collect();
    let sets: Vec<BTreeSet<usize>> = top_lists.iter().map(|l| l.iter().copied().collect()).collect();

    let mut pairwise = Vec::new();
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            pairwise.push(PairOverlap {
                left: i,
                right: j,
                intersection: sets[i].intersection(&sets[j]).count(),
            });
        }
    }
    let union: BTreeSet<usize> = sets.iter().flatten().copied().collect();

    let reference_top = reference.map(|r| r.top(k));
    let (entering, dropping) = match &reference_top {
        Some(r) => {
            let rset: BTreeSet<usize> = r.iter().copied().collect();
            let entering = union.difference(&rset).copied().collect();
            let dropping = r.iter().copied().filter(|j| sets.iter().any(|s| !s.contains(j))).collect();
            (entering, dropping)
        }
        None => (Vec::new(), Vec::new()),
    };

    Ok(OverlapReport {
        k,
        top_lists,
        pairwise,
        union: union.into_iter().collect(),
        reference_top,
        entering,
        dropping,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn zero_sigma_is_identity() {
        let t = FeatureTable::from_triples([("a", 0.3, 0.9), ("b", 1.0, 0.0)]).unwrap();
        let mut rng = run_stream(1, 0);
        assert_eq!(perturb_table(&t, 0.0, &mut rng).unwrap(), t);
    }

    #[test]
    fn draws_stay_in_unit_interval() {
        let dist = UnitTruncatedNormal::new(0.99, 0.3).unwrap();
        let mut rng = run_stream(2, 0);
        assert!((0..10_000).all(|_| (0.0..=1.0).contains(&dist.sample(&mut rng))));
    }

    #[test]
    fn rank_accumulation() {
        let mut r = RankTable::empty(names(4), 3);
        r.add_run(&[2, 0, 1]);
        r.add_run(&[2, 1, 3]);
        assert_eq!(r.total_rank, vec![2, 3, 6, 1]);
        assert_eq!(r.selection_count, vec![1, 2, 2, 1]);
        assert_eq!(r.rank_sum(), 2 * 6);
        assert_eq!(r.ordering(), vec![2, 1, 0, 3]);
    }

    #[test]
    fn overlap_self_and_disjoint() {
        let mut a = RankTable::empty(names(4), 2);
        a.add_run(&[0, 1]);
        let mut b = RankTable::empty(names(4), 2);
        b.add_run(&[2, 3]);
        let rep = compare_rank_tables(&[a.clone(), a.clone()], 2, None).unwrap();
        assert_eq!(rep.pairwise[0].intersection, 2);
        let rep = compare_rank_tables(&[a.clone(), b.clone()], 2, Some(&a)).unwrap();
        assert_eq!(rep.pairwise[0].intersection, 0);
        assert_eq!(rep.union, vec![0, 1, 2, 3]);
        assert_eq!(rep.entering, vec![2, 3]);
        assert_eq!(rep.dropping, vec![0, 1]);
    }

    #[test]
    fn overlap_rejects_mismatched_features() {
        let a = RankTable::empty(names(3), 2);
        let b = RankTable::empty(names(4), 2);
        assert_eq!(compare_rank_tables(&[a, b], 2, None), Err(Error::MismatchedFeatures));
    }

    #[test]
    fn config_validation() {
        let bad = PerturbationConfig {
            runs: 0,
            ..PerturbationConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(UnitTruncatedNormal::new(0.5, -1.0).is_err());
    }
}
