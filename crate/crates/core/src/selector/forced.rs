use crate::error::{Error, Result};
use crate::region::NoImprovementRegion;

use super::TIE_TOL;

/// A feature offered for a forced step, as its point `(c, d)` in the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub index: usize,
    pub c: f64,
    pub d: f64,
}

/// Picks the non-improving candidate whose point is nearest the region
/// boundary (Euclidean distance to the clipped boundary segments). Ties go to
/// the lower table index.
pub fn select_among_nonimproving(candidates: &[Candidate], region: &NoImprovementRegion) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let dist: Vec<f64> = candidates.iter().map(|k| region.distance_to_boundary(k.c, k.d)).collect();
    let min = dist.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(candidates
        .iter()
        .zip(&dist)
        .filter(|(_, &d)| d <= min + TIE_TOL)
        .map(|(k, _)| k.index)
        .min()
        .expect("non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_region() -> NoImprovementRegion {
        NoImprovementRegion::from_alphas(Some(0.175 / 0.255), Some(0.525 / 0.045)).unwrap()
    }

    #[test]
    fn single_candidate() {
        let k = [Candidate { index: 7, c: 0.5, d: 0.5 }];
        assert_eq!(select_among_nonimproving(&k, &fixture_region()).unwrap(), 7);
    }

    #[test]
    fn empty_is_rejected() {
        assert_eq!(select_among_nonimproving(&[], &fixture_region()), Err(Error::EmptyCandidates));
    }

    #[test]
    fn boundary_point_beats_interior() {
        let r = fixture_region();
        let alpha_lo = r.alpha_lo().unwrap();
        let on_line = Candidate {
            index: 5,
            c: alpha_lo * 0.5,
            d: 0.5,
        };
        let inside = Candidate { index: 1, c: 0.5, d: 0.5 };
        assert!(r.distance_to_boundary(on_line.c, on_line.d) < 1e-15);
        assert_eq!(select_among_nonimproving(&[inside, on_line], &r).unwrap(), 5);
    }

    #[test]
    fn nearer_to_lower_line_wins() {
        let r = NoImprovementRegion::from_alphas(Some(0.686), Some(11.667)).unwrap();
        let k = [
            Candidate { index: 0, c: 0.5, d: 0.5 },
            Candidate { index: 1, c: 0.68, d: 0.99 },
        ];
        assert_eq!(select_among_nonimproving(&k, &r).unwrap(), 1);
    }

    #[test]
    fn equal_distance_goes_to_lower_index() {
        let r = fixture_region();
        let k = [
            Candidate { index: 4, c: 0.5, d: 0.5 },
            Candidate { index: 2, c: 0.5, d: 0.5 },
        ];
        assert_eq!(select_among_nonimproving(&k, &r).unwrap(), 2);
    }
}
