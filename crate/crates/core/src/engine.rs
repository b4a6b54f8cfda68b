//! Exact Naive Bayes error over a list of cells.
//!
//! After `k` features have been folded in, the feature space `{0,1}^k` is
//! represented by one [`Cell`] per binary vector holding the two joint
//! masses `a = P(pos) P(x|pos)` and `b = P(neg) P(x|neg)`. The Bayes error
//! is the sum of `min(a, b)` over all cells. Adding a feature with
//! `(c, d) = (P(x=1|pos), P(x=1|neg))` splits each cell in two.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_probability, ClassPriors, FeatureTable};

/// Default width cap: at most `2^25` cells.
pub const DEFAULT_MAX_DEPTH: u32 = 25;
const MAX_SUPPORTED_DEPTH: u32 = 48;
const MAX_TRACKED_DEPTH: u32 = 64;
/// Slack allowed when checking an error component against its prior.
const COMPONENT_TOL: f64 = 1e-9;

/// Joint masses of one element of the current feature space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// P(pos) * P(x | pos)
    pub a: f64,
    /// P(neg) * P(x | neg)
    pub b: f64,
}

impl Cell {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    #[inline]
    pub fn error(&self) -> f64 {
        self.a.min(self.b)
    }
}

/// Knobs of the cell-list engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Cell lists may hold at most `2^max_depth` cells.
    pub max_depth: u32,
    /// Cells with `0 < min(a,b) <= prune_threshold` are dropped and their
    /// error mass is carried as a certified upper bound. Zero disables it.
    pub prune_threshold: f64,
    /// Keep the feature-value pattern of every cell.
    pub track_patterns: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            max_depth: DEFAULT_MAX_DEPTH,
            prune_threshold: 0.0,
            track_patterns: false,
        }
    }
}

impl EngineConfig {
    pub fn with_max_depth(mut self, max_depth: u32) -> Self {
        self.max_depth = max_depth;
        self
    }

    pub fn with_prune_threshold(mut self, threshold: f64) -> Self {
        self.prune_threshold = threshold;
        self
    }

    pub fn with_patterns(mut self) -> Self {
        self.track_patterns = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.max_depth > MAX_SUPPORTED_DEPTH {
            return Err(Error::InvalidConfig(format!(
                "max depth {} must be in 1..={MAX_SUPPORTED_DEPTH}",
                self.max_depth
            )));
        }
        if self.prune_threshold.is_nan() || self.prune_threshold < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "prune threshold {} must be non-negative",
                self.prune_threshold
            )));
        }
        Ok(())
    }

    pub fn max_cells(&self) -> usize {
        1usize << self.max_depth
    }

    /// Fails when a subset of `count` features cannot fit under the cap.
    pub fn check_depth(&self, count: usize) -> Result<()> {
        if count > self.max_depth as usize {
            Err(Error::Capacity {
                max_depth: self.max_depth,
                required: format!("{count} features"),
            })
        } else {
            Ok(())
        }
    }
}

/// Total error split by which way the mistake goes. The positive class is
/// the disease of interest.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub error: f64,
    /// P(labelled positive and actually negative)
    pub false_positive: f64,
    /// P(labelled negative and actually positive)
    pub false_negative: f64,
}

impl ErrorBreakdown {
    /// Sums `min(a, b)` over cells. A cell is labelled positive when
    /// `a >= b`, so ties put their mass into the false positives.
    pub fn accumulate(cells: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut out = Self::default();
        for (a, b) in cells {
            if b <= a {
                out.error += b;
                out.false_positive += b;
            } else {
                out.error += a;
                out.false_negative += a;
            }
        }
        out
    }
}

/// The exact joint distribution over the selected-feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct CellList {
    cells: Vec<Cell>,
    /// Bit `k` of a pattern is the value of the `k`-th folded feature.
    patterns: Option<Vec<u64>>,
    depth: u32,
    pruned_mass: (f64, f64),
    pruned_error_bound: f64,
}

impl CellList {
    /// The single-cell list of the empty feature set.
    pub fn from_priors(priors: ClassPriors, config: &EngineConfig) -> Result<Self> {
        config.validate()?;
        if config.track_patterns && config.max_depth > MAX_TRACKED_DEPTH {
            return Err(Error::InvalidConfig("pattern tracking supports at most 64 features".into()));
        }
        let mut list = Self {
            cells: vec![Cell::new(priors.positive(), priors.negative())],
            patterns: config.track_patterns.then(|| vec![0]),
            depth: 0,
            pruned_mass: (0.0, 0.0),
            pruned_error_bound: 0.0,
        };
        list.prune_in_place(0.0);
        Ok(list)
    }

    /// Builds a list directly from cells; used for fixtures and analysis.
    pub fn from_cells(cells: Vec<Cell>, depth: u32) -> Result<Self> {
        for c in &cells {
            if !(c.a >= 0.0 && c.b >= 0.0) || !c.a.is_finite() || !c.b.is_finite() {
                return Err(Error::InvalidConfig(format!("cell masses must be non-negative, got ({}, {})", c.a, c.b)));
            }
        }
        if depth < 64 && cells.len() > 1usize << depth {
            return Err(Error::InvalidConfig(format!("{} cells cannot have depth {depth}", cells.len())));
        }
        Ok(Self {
            cells,
            patterns: None,
            depth,
            pruned_mass: (0.0, 0.0),
            pruned_error_bound: 0.0,
        })
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn patterns(&self) -> Option<&[u64]> {
        self.patterns.as_deref()
    }

    /// `(a, b)` mass removed by pruning so far.
    pub fn pruned_mass(&self) -> (f64, f64) {
        self.pruned_mass
    }

    /// Error mass removed by thresholded pruning; the true error lies in
    /// `[evaluate_error().error, evaluate_error().error + pruned_error_bound()]`.
    pub fn pruned_error_bound(&self) -> f64 {
        self.pruned_error_bound
    }

    /// Total `(Σa, Σb)` over live cells plus pruned mass.
    pub fn total_mass(&self) -> (f64, f64) {
        let (mut a, mut b) = self.pruned_mass;
        for c in &self.cells {
            a += c.a;
            b += c.b;
        }
        (a, b)
    }

    /// Mass pairs of the children produced by adding a feature, in list
    /// order: every `x_new = 1` child first, then every `x_new = 0` child.
    fn children(&self, c: f64, d: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let present = self.cells.iter().map(move |cell| (cell.a * c, cell.b * d));
        let absent = self.cells.iter().map(move |cell| (cell.a * (1.0 - c), cell.b * (1.0 - d)));
        present.chain(absent)
    }

    /// Splits every cell on a new feature with `(c, d) = (P(x=1|pos), P(x=1|neg))`.
    pub fn expand(&self, c: f64, d: f64, config: &EngineConfig) -> Result<Self> {
        check_probability("c", c)?;
        check_probability("d", d)?;
        let needed = self.cells.len() * 2;
        if needed > config.max_cells() {
            return Err(Error::Capacity {
                max_depth: config.max_depth,
                required: format!("{needed} cells"),
            });
        }
        let mut cells = Vec::with_capacity(needed);
        cells.extend(self.children(c, d).map(|(a, b)| Cell::new(a, b)));
        let patterns = match &self.patterns {
            Some(p) => {
                if self.depth >= MAX_TRACKED_DEPTH {
                    return Err(Error::Capacity {
                        max_depth: MAX_TRACKED_DEPTH,
                        required: "a tracked pattern longer than 64 bits".into(),
                    });
                }
                let bit = 1u64 << self.depth;
                let mut next = Vec::with_capacity(needed);
                next.extend(p.iter().map(|&x| x | bit));
                next.extend(p.iter().copied());
                Some(next)
            }
            None => None,
        };
        let mut out = Self {
            cells,
            patterns,
            depth: self.depth + 1,
            pruned_mass: self.pruned_mass,
            pruned_error_bound: self.pruned_error_bound,
        };
        out.prune_in_place(config.prune_threshold);
        Ok(out)
    }

    /// Error the list would have after adding `(c, d)`, without building it.
    /// Sums in the same order as [`CellList::expand`] followed by
    /// [`CellList::evaluate_error`], so both routes agree bit for bit.
    pub fn expanded_error(&self, c: f64, d: f64) -> ErrorBreakdown {
        ErrorBreakdown::accumulate(self.children(c, d))
    }

    pub fn evaluate_error(&self) -> ErrorBreakdown {
        ErrorBreakdown::accumulate(self.cells.iter().map(|c| (c.a, c.b)))
    }

    /// Returns a pruned copy; see [`EngineConfig::prune_threshold`].
    pub fn prune(&self, threshold: f64) -> Self {
        let mut out = self.clone();
        out.prune_in_place(threshold.max(0.0));
        out
    }

    fn prune_in_place(&mut self, threshold: f64) {
        let keep: Vec<bool> = self
            .cells
            .iter()
            .map(|c| {
                let m = c.error();
                m > 0.0 && m > threshold
            })
            .collect();
        if keep.iter().all(|&k| k) {
            return;
        }
        let mut idx = 0;
        let (mut pa, mut pb) = self.pruned_mass;
        let mut bound = self.pruned_error_bound;
        self.cells.retain(|c| {
            let k = keep[idx];
            idx += 1;
            if !k {
                pa += c.a;
                pb += c.b;
                bound += c.error();
            }
            k
        });
        if let Some(p) = &mut self.patterns {
            let mut idx = 0;
            p.retain(|_| {
                let k = keep[idx];
                idx += 1;
                k
            });
        }
        self.pruned_mass = (pa, pb);
        self.pruned_error_bound = bound;
    }
}

/// Error of the classifier that uses only the priors.
pub fn prior_error(priors: ClassPriors) -> ErrorBreakdown {
    ErrorBreakdown::accumulate([(priors.positive(), priors.negative())])
}

/// Error of a feature subset, folding the features in the given order.
pub fn error_of_subset(
    table: &FeatureTable,
    priors: ClassPriors,
    subset: &[usize],
    config: &EngineConfig,
) -> Result<ErrorBreakdown> {
    Ok(list_for_subset(table, priors, subset, config)?.evaluate_error())
}

/// The cell list of a feature subset.
pub fn list_for_subset(
    table: &FeatureTable,
    priors: ClassPriors,
    subset: &[usize],
    config: &EngineConfig,
) -> Result<CellList> {
    table.validate_subset(subset)?;
    config.check_depth(subset.len())?;
    let mut list = CellList::from_priors(priors, config)?;
    for &j in subset {
        let f = &table.features()[j];
        list = list.expand(f.p_pos, f.p_neg, config)?;
    }
    Ok(list)
}

/// Sensitivity and specificity; `None` when the corresponding prior is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensSpec {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

/// `sensitivity = (P(pos) - fn) / P(pos)`, `specificity = (P(neg) - fp) / P(neg)`.
pub fn sensitivity_specificity(e: &ErrorBreakdown, priors: ClassPriors) -> Result<SensSpec> {
    fn rate(measure: &'static str, prior: f64, component: f64) -> Result<Option<f64>> {
        if component < -COMPONENT_TOL || component > prior + COMPONENT_TOL {
            return Err(Error::InconsistentMeasure {
                measure,
                prior,
                component,
            });
        }
        if prior == 0.0 {
            return if component.abs() <= COMPONENT_TOL {
                Ok(None)
            } else {
                Err(Error::InconsistentMeasure {
                    measure,
                    prior,
                    component,
                })
            };
        }
        Ok(Some(((prior - component) / prior).clamp(0.0, 1.0)))
    }
    Ok(SensSpec {
        sensitivity: rate("sensitivity", priors.positive(), e.false_negative)?,
        specificity: rate("specificity", priors.negative(), e.false_positive)?,
    })
}

/// Class label of the two-class problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

/// Unnormalized posteriors `P(class) * Π P(x_j | class)` of one object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassSupport {
    pub positive: f64,
    pub negative: f64,
}

impl ClassSupport {
    /// Ties go to the positive class.
    pub fn label(&self) -> Label {
        if self.positive >= self.negative {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

/// Supports for a fully observed binary vector, one value per table feature.
pub fn class_supports(table: &FeatureTable, priors: ClassPriors, values: &[bool]) -> Result<ClassSupport> {
    if values.len() != table.len() {
        return Err(Error::InvalidConfig(format!(
            "expected {} feature values, got {}",
            table.len(),
            values.len()
        )));
    }
    let mut s = ClassSupport {
        positive: priors.positive(),
        negative: priors.negative(),
    };
    for (f, &v) in table.features().iter().zip(values) {
        if v {
            s.positive *= f.p_pos;
            s.negative *= f.p_neg;
        } else {
            s.positive *= 1.0 - f.p_pos;
            s.negative *= 1.0 - f.p_neg;
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(x: f64, y: f64, tol: f64) -> bool {
        (x - y).abs() <= tol
    }

    #[test]
    fn prior_error_cases() {
        let e = prior_error(ClassPriors::new(0.3, 0.7).unwrap());
        assert!(close(e.error, 0.3, 1e-15));
        assert_eq!(e.false_negative, 0.3);
        assert_eq!(e.false_positive, 0.0);

        let e = prior_error(ClassPriors::equal());
        assert_eq!(e.error, 0.5);
        assert_eq!(e.false_positive, 0.5);

        let e = prior_error(ClassPriors::new(1.0, 0.0).unwrap());
        assert_eq!(e.error, 0.0);
    }

    #[test]
    fn expand_fixture() {
        let cfg = EngineConfig::default();
        let list = CellList::from_priors(ClassPriors::new(0.3, 0.7).unwrap(), &cfg).unwrap();
        let out = list.expand(0.15, 0.75, &cfg).unwrap();
        let want = [(0.045, 0.525), (0.255, 0.175)];
        assert_eq!(out.len(), 2);
        for (c, w) in out.cells().iter().zip(want) {
            assert!(close(c.a, w.0, 1e-15) && close(c.b, w.1, 1e-15), "{c:?}");
        }
        assert_eq!(out.depth(), 1);
        assert!(close(out.evaluate_error().error, 0.22, 1e-15));
    }

    #[test]
    fn expand_two_cells() {
        let cfg = EngineConfig::default();
        let list = CellList::from_cells(vec![Cell::new(0.15, 0.05), Cell::new(0.35, 0.45)], 1).unwrap();
        let out = list.expand(0.4, 0.6, &cfg).unwrap();
        let want = [(0.06, 0.03), (0.14, 0.27), (0.09, 0.02), (0.21, 0.18)];
        for (c, w) in out.cells().iter().zip(want) {
            assert!(close(c.a, w.0, 1e-15) && close(c.b, w.1, 1e-15), "{c:?}");
        }
    }

    #[test]
    fn separating_feature_zeroes_error() {
        let cfg = EngineConfig::default();
        let list = CellList::from_cells(vec![Cell::new(0.15, 0.05), Cell::new(0.35, 0.45)], 1).unwrap();
        let out = list.expand(1.0, 0.0, &cfg).unwrap();
        assert_eq!(out.evaluate_error().error, 0.0);
        // every child has a zero side, so all are pruned exactly
        assert!(out.is_empty());
        assert_eq!(out.pruned_error_bound(), 0.0);
        let (a, b) = out.total_mass();
        assert!(close(a, 0.5, 1e-15) && close(b, 0.5, 1e-15));
    }

    #[test]
    fn fp_fn_split() {
        let list = CellList::from_cells(vec![Cell::new(0.15, 0.05), Cell::new(0.35, 0.45)], 1).unwrap();
        let e = list.evaluate_error();
        assert!(close(e.error, 0.40, 1e-15));
        assert!(close(e.false_positive, 0.05, 1e-15));
        assert!(close(e.false_negative, 0.35, 1e-15));
    }

    #[test]
    fn tie_cells_count_as_false_positive() {
        let list = CellList::from_cells(vec![Cell::new(0.25, 0.25), Cell::new(0.25, 0.25)], 1).unwrap();
        let e = list.evaluate_error();
        assert_eq!(e.false_positive, 0.5);
        assert_eq!(e.false_negative, 0.0);
    }

    #[test]
    fn expanded_error_matches_expand() {
        let cfg = EngineConfig::default();
        let list = CellList::from_cells(vec![Cell::new(0.15, 0.05), Cell::new(0.35, 0.45)], 1).unwrap();
        let fast = list.expanded_error(0.37, 0.81);
        let slow = list.expand(0.37, 0.81, &cfg).unwrap().evaluate_error();
        assert_eq!(fast, slow);
    }

    #[test]
    fn capacity_error_names_cap() {
        let cfg = EngineConfig::default().with_max_depth(2);
        let mut list = CellList::from_priors(ClassPriors::equal(), &cfg).unwrap();
        list = list.expand(0.3, 0.6, &cfg).unwrap();
        list = list.expand(0.3, 0.6, &cfg).unwrap();
        let err = list.expand(0.3, 0.6, &cfg).unwrap_err();
        assert!(matches!(err, Error::Capacity { max_depth: 2, .. }));
        assert!(err.to_string().contains("depth 2"));
    }

    #[test]
    fn zero_threshold_prunes_only_zero_min() {
        let list = CellList::from_cells(vec![Cell::new(0.2, 0.0), Cell::new(0.3, 0.5)], 1).unwrap();
        let p = list.prune(0.0);
        assert_eq!(p.cells(), &[Cell::new(0.3, 0.5)]);
        assert_eq!(p.pruned_error_bound(), 0.0);
        assert_eq!(p.pruned_mass(), (0.2, 0.0));
        assert_eq!(p.evaluate_error(), list.evaluate_error());
    }

    #[test]
    fn threshold_pruning_carries_bound() {
        let list = CellList::from_cells(vec![Cell::new(0.01, 0.02), Cell::new(0.3, 0.67)], 1).unwrap();
        let p = list.prune(0.05);
        assert_eq!(p.len(), 1);
        assert_eq!(p.pruned_error_bound(), 0.01);
        let full = list.evaluate_error().error;
        let lo = p.evaluate_error().error;
        assert!(lo <= full && full <= lo + p.pruned_error_bound() + 1e-15);
    }

    #[test]
    fn error_of_subset_rejects_bad_subsets() {
        let t = FeatureTable::from_triples([("x1", 0.3, 0.1), ("x2", 0.4, 0.6)]).unwrap();
        let cfg = EngineConfig::default();
        assert_eq!(
            error_of_subset(&t, ClassPriors::equal(), &[0, 0], &cfg),
            Err(Error::DuplicateIndex(0))
        );
        let small = cfg.with_max_depth(1);
        assert!(error_of_subset(&t, ClassPriors::equal(), &[0, 1], &small)
            .unwrap_err()
            .is_capacity());
        assert_eq!(error_of_subset(&t, ClassPriors::equal(), &[], &cfg).unwrap().error, 0.5);
    }

    #[test]
    fn sens_spec_formula() {
        let e = ErrorBreakdown {
            error: 0.40,
            false_positive: 0.35,
            false_negative: 0.05,
        };
        let s = sensitivity_specificity(&e, ClassPriors::equal()).unwrap();
        assert!(close(s.sensitivity.unwrap(), 0.9, 1e-12));
        assert!(close(s.specificity.unwrap(), 0.3, 1e-12));

        let s = sensitivity_specificity(&ErrorBreakdown::default(), ClassPriors::equal()).unwrap();
        assert_eq!((s.sensitivity, s.specificity), (Some(1.0), Some(1.0)));

        // prior-only classifier always predicts positive when P(neg) < P(pos)
        let pr = ClassPriors::new(0.8, 0.2).unwrap();
        let s = sensitivity_specificity(&prior_error(pr), pr).unwrap();
        assert_eq!(s.sensitivity, Some(1.0));
        assert!(close(s.specificity.unwrap(), 0.0, 1e-15));
    }

    #[test]
    fn sens_spec_zero_prior() {
        let pr = ClassPriors::new(1.0, 0.0).unwrap();
        let s = sensitivity_specificity(&ErrorBreakdown::default(), pr).unwrap();
        assert_eq!(s.specificity, None);
        assert_eq!(s.sensitivity, Some(1.0));
        let bad = ErrorBreakdown {
            error: 0.1,
            false_positive: 0.1,
            false_negative: 0.0,
        };
        assert!(matches!(
            sensitivity_specificity(&bad, pr),
            Err(Error::InconsistentMeasure { measure: "specificity", .. })
        ));
    }

    #[test]
    fn patterns_follow_cells() {
        let t = FeatureTable::from_triples([("x1", 0.3, 0.1), ("x2", 0.4, 0.6), ("x3", 0.8, 0.7)]).unwrap();
        let cfg = EngineConfig::default().with_patterns();
        let list = list_for_subset(&t, ClassPriors::equal(), &[0, 1, 2], &cfg).unwrap();
        let pats = list.patterns().unwrap();
        assert_eq!(pats.len(), 8);
        // x = (1, 0, 1) -> bits 0 and 2
        let at = pats.iter().position(|&p| p == 0b101).unwrap();
        let cell = list.cells()[at];
        assert!(close(cell.a, 0.072, 1e-15));
        assert!(close(cell.b, 0.014, 1e-15));
    }

    #[test]
    fn supports_and_label() {
        let t = FeatureTable::from_triples([("x1", 0.3, 0.1), ("x2", 0.4, 0.6), ("x3", 0.8, 0.7)]).unwrap();
        let s = class_supports(&t, ClassPriors::equal(), &[true, false, true]).unwrap();
        assert!(close(s.positive, 0.072, 1e-15));
        assert!(close(s.negative, 0.014, 1e-15));
        assert_eq!(s.label(), Label::Positive);
    }
}
