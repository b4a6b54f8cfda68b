use rayon::prelude::*;

use crate::engine::{prior_error, CellList, EngineConfig};
use crate::error::{Error, Result};
use crate::model::{ClassPriors, FeatureTable};
use crate::region::NoImprovementRegion;

use super::{
    argmin_with_ties, make_step, select_among_nonimproving, Candidate, SelectionTrace, StopReason, StoppingRule,
    REDUCTION_TOL,
};

/// Sequential forward selection with the exact error as criterion.
///
/// Each step tries every remaining feature against the current cell list
/// and keeps the one with the lowest resulting error. When no remaining
/// feature lowers the error the step is forced: the feature closest to the
/// boundary of the no-improvement region is taken and flagged.
pub fn sfs_select(
    table: &FeatureTable,
    priors: ClassPriors,
    stop: &StoppingRule,
    config: &EngineConfig,
) -> Result<SelectionTrace> {
    stop.validate()?;
    if let Some(d) = stop.target_count {
        if d > table.len() {
            return Err(Error::InvalidConfig(format!(
                "cannot select {d} features from a table of {}",
                table.len()
            )));
        }
        config.check_depth(d)?;
    }
    if stop.min_reduction.is_some() {
        log::warn!("min_reduction is advisory: error reductions are not monotone, selection will not stop on it");
    }

    let features = table.features();
    let initial = prior_error(priors);
    let mut list = CellList::from_priors(priors, config)?;
    let mut current = initial;
    let mut remaining: Vec<usize> = (0..table.len()).collect();
    let mut steps = Vec::new();

    let stop_reason = loop {
        if stop.target_count.is_some_and(|d| steps.len() >= d) {
            break StopReason::ReachedD;
        }
        if stop.target_error.is_some_and(|t| current.error <= t) {
            break StopReason::ReachedErrorTarget;
        }
        if remaining.is_empty() {
            break StopReason::ExhaustedFeatures;
        }

        let errors: Vec<f64> = remaining
            .par_iter()
            .map(|&j| list.expanded_error(features[j].p_pos, features[j].p_neg).error)
            .collect();
        let best = argmin_with_ties(&errors).expect("remaining is non-empty");
        let forced = current.error - errors[best] <= REDUCTION_TOL;

        let pos = if forced {
            match NoImprovementRegion::of(&list) {
                Ok(region) => {
                    let cands: Vec<Candidate> = remaining
                        .iter()
                        .map(|&j| Candidate {
                            index: j,
                            c: features[j].p_pos,
                            d: features[j].p_neg,
                        })
                        .collect();
                    let pick = select_among_nonimproving(&cands, &region)?;
                    remaining.iter().position(|&j| j == pick).expect("pick is a candidate")
                }
                // error already zero: nothing to escape from
                Err(Error::RegionUndefined) => 0,
                Err(e) => return Err(e),
            }
        } else {
            best
        };

        let index = remaining.remove(pos);
        let f = &features[index];
        list = list.expand(f.p_pos, f.p_neg, config)?;
        let e = list.evaluate_error();
        let step = make_step(table, priors, index, current.error, e, forced, list.pruned_error_bound())?;
        if let Some(m) = stop.min_reduction {
            if !forced && step.reduction < m {
                log::warn!(
                    "step {} ({}) reduced the error by {:.3e}, below min_reduction {m:.3e}",
                    steps.len() + 1,
                    step.feature_name,
                    step.reduction
                );
            }
        }
        current = e;
        steps.push(step);
    };

    Ok(SelectionTrace {
        steps,
        priors,
        initial_error: initial,
        stop_reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(x: f64, y: f64) -> bool {
        (x - y).abs() <= 1e-12
    }

    #[test]
    fn two_feature_nonmonotone_reductions() {
        let t = FeatureTable::from_triples([("x1", 0.15, 0.75), ("x2", 0.90, 0.30)]).unwrap();
        let pr = ClassPriors::new(0.3, 0.7).unwrap();
        let tr = sfs_select(&t, pr, &StoppingRule::count(2), &EngineConfig::default()).unwrap();
        assert_eq!(tr.selected(), vec![0, 1]);
        assert!(close(tr.steps[0].cumulative_error, 0.22));
        assert!(close(tr.steps[1].cumulative_error, 0.123));
        assert!(close(tr.steps[0].reduction, 0.08));
        assert!(close(tr.steps[1].reduction, 0.097));
        assert_eq!(tr.stop_reason, StopReason::ReachedD);
    }

    #[test]
    fn small_table_pair() {
        let t = FeatureTable::from_triples([("x1", 0.3, 0.1), ("x2", 0.4, 0.6), ("x3", 0.8, 0.7)]).unwrap();
        let tr = sfs_select(&t, ClassPriors::equal(), &StoppingRule::count(2), &EngineConfig::default()).unwrap();
        assert_eq!(tr.selected(), vec![0, 1]);
        assert!(close(tr.steps[0].cumulative_error, 0.40));
        assert!(close(tr.steps[1].cumulative_error, 0.37));
    }

    #[test]
    fn full_count_uses_every_feature() {
        let t = FeatureTable::from_triples([("x1", 0.3, 0.1), ("x2", 0.4, 0.6), ("x3", 0.8, 0.7)]).unwrap();
        let tr = sfs_select(&t, ClassPriors::equal(), &StoppingRule::count(3), &EngineConfig::default()).unwrap();
        let mut sel = tr.selected();
        sel.sort();
        assert_eq!(sel, vec![0, 1, 2]);
    }

    #[test]
    fn error_target_stops_early() {
        let t = FeatureTable::from_triples([("x1", 0.15, 0.75), ("x2", 0.90, 0.30)]).unwrap();
        let pr = ClassPriors::new(0.3, 0.7).unwrap();
        let tr = sfs_select(&t, pr, &StoppingRule::error(0.25), &EngineConfig::default()).unwrap();
        assert_eq!(tr.steps.len(), 1);
        assert_eq!(tr.stop_reason, StopReason::ReachedErrorTarget);
        let tr = sfs_select(&t, pr, &StoppingRule::error(0.0), &EngineConfig::default()).unwrap();
        assert_eq!(tr.stop_reason, StopReason::ExhaustedFeatures);
    }

    #[test]
    fn capacity_is_checked_up_front() {
        let t = FeatureTable::from_triples([("x1", 0.15, 0.75), ("x2", 0.90, 0.30), ("x3", 0.5, 0.6)]).unwrap();
        let cfg = EngineConfig::default().with_max_depth(2);
        let err = sfs_select(&t, ClassPriors::equal(), &StoppingRule::count(3), &cfg).unwrap_err();
        assert!(err.is_capacity());
    }

    #[test]
    fn forced_step_when_nothing_helps() {
        // every point lies inside the no-improvement region of the prior cell
        let t = FeatureTable::from_triples([("x1", 0.6, 0.3), ("flat", 0.5, 0.5), ("near", 0.52, 0.5)]).unwrap();
        let pr = ClassPriors::new(0.3, 0.7).unwrap();
        let tr = sfs_select(&t, pr, &StoppingRule::count(3), &EngineConfig::default()).unwrap();
        assert_eq!(tr.steps.len(), 3);
        for w in tr.steps.windows(2) {
            assert!(w[1].cumulative_error <= w[0].cumulative_error + 1e-12);
        }
        assert!(tr.steps[0].forced);
        for s in &tr.steps {
            assert_eq!(s.forced, s.reduction <= REDUCTION_TOL);
        }
    }
}
