//! Per-cell error reduction and the no-improvement region.
//!
//! For a cell `(a, b)` and a candidate feature `(c, d)` the reduction is
//! `Δ = ½(|A − B| − |A| + |B|)` with `A = a − b` and `B = ac − bd`. It is
//! zero exactly when `c/d` and `(1−c)/(1−d)` fall on the same side of the
//! cell's ratio `α = b/a`. Intersecting those regions over all cells gives a
//! parallelogram bounded by the lines `c = α·d` and `1 − c = α·(1 − d)` for
//! the two tightest ratios on either side of one.

use serde::{Deserialize, Serialize};

use crate::engine::CellList;
use crate::error::{Error, Result};

/// Residual on the mass scale below which a point counts as lying on a
/// boundary. Matches the `Δ ≤ 1e-12` notion of "no reduction".
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Error reduction of one cell from adding `(c, d)`, closed form.
pub fn reduction_closed_form(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let big_a = a - b;
    let big_b = a * c - b * d;
    0.5 * ((big_a - big_b).abs() - big_a.abs() + big_b.abs())
}

/// Same quantity as [`reduction_closed_form`] written as a difference of minima.
pub fn reduction_by_minima(a: f64, b: f64, c: f64, d: f64) -> f64 {
    a.min(b) - ((a * c).min(b * d) + (a * (1.0 - c)).min(b * (1.0 - d)))
}

/// True when adding `(c, d)` leaves the cell's error unchanged.
///
/// The ratio test compares `c/d` and `(1−c)/(1−d)` against `α = b/a`. It is
/// evaluated through the cross products `ac − bd` and `a(1−c) − b(1−d)`,
/// which have the signs of `c/d − α` and `(1−c)/(1−d) − α` scaled by `a·d`
/// and `a·(1−d)`. That reading gives `x/0 = +∞` for `x > 0` and makes
/// `0/0` sit exactly on `α`. A cell with `a = 0` carries no error and always
/// passes.
pub fn no_improvement_test(a: f64, b: f64, c: f64, d: f64) -> bool {
    if a == 0.0 {
        return true;
    }
    let present = a * c - b * d;
    let absent = a * (1.0 - c) - b * (1.0 - d);
    // Δ equals min(|present|, |absent|) when the signs differ, zero otherwise
    present.signum() == absent.signum()
        || present == 0.0
        || absent == 0.0
        || present.abs().min(absent.abs()) <= BOUNDARY_TOL
}

/// Bound of the region on one side of `α = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Bound {
    alpha: f64,
    /// `a` of the cell that defines the bound; converts residuals in `(c, d)`
    /// space back to mass units.
    scale: f64,
}

/// Intersection of the no-improvement regions of all cells in a list.
///
/// A cell with `a == b` yields `α = 1` and pins the region to the diagonal
/// `c = d`; it is therefore counted on both sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoImprovementRegion {
    hi: Option<Bound>,
    lo: Option<Bound>,
}

/// A boundary line clipped to the unit square, as a segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub from: (f64, f64),
    pub to: (f64, f64),
}

impl Segment {
    pub fn distance(&self, p: (f64, f64)) -> f64 {
        let (dx, dy) = (self.to.0 - self.from.0, self.to.1 - self.from.1);
        let len2 = dx * dx + dy * dy;
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((p.0 - self.from.0) * dx + (p.1 - self.from.1) * dy) / len2).clamp(0.0, 1.0)
        };
        let (qx, qy) = (self.from.0 + t * dx, self.from.1 + t * dy);
        ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
    }
}

impl NoImprovementRegion {
    /// Region of a cell list. Only cells with `a > 0` and `b > 0` constrain it.
    pub fn of(list: &CellList) -> Result<Self> {
        let mut hi: Option<Bound> = None;
        let mut lo: Option<Bound> = None;
        for cell in list.cells() {
            if !(cell.a > 0.0 && cell.b > 0.0) {
                continue;
            }
            let alpha = cell.b / cell.a;
            let cand = Bound { alpha, scale: cell.a };
            if alpha >= 1.0 && hi.is_none_or(|h| alpha < h.alpha) {
                hi = Some(cand);
            }
            if alpha <= 1.0 && lo.is_none_or(|l| alpha > l.alpha) {
                lo = Some(cand);
            }
        }
        if hi.is_none() && lo.is_none() {
            return Err(Error::RegionUndefined);
        }
        Ok(Self { hi, lo })
    }

    /// Region from explicit ratio bounds, e.g. read back from a report.
    pub fn from_alphas(alpha_lo: Option<f64>, alpha_hi: Option<f64>) -> Result<Self> {
        if alpha_lo.is_none() && alpha_hi.is_none() {
            return Err(Error::RegionUndefined);
        }
        if let Some(l) = alpha_lo {
            if !(0.0..=1.0).contains(&l) || l == 0.0 {
                return Err(Error::InvalidConfig(format!("alpha_lo {l} must be in (0, 1]")));
            }
        }
        if let Some(h) = alpha_hi {
            if !(h >= 1.0 && h.is_finite()) {
                return Err(Error::InvalidConfig(format!("alpha_hi {h} must be finite and >= 1")));
            }
        }
        Ok(Self {
            hi: alpha_hi.map(|alpha| Bound { alpha, scale: 1.0 }),
            lo: alpha_lo.map(|alpha| Bound { alpha, scale: 1.0 }),
        })
    }

    /// Smallest cell ratio `b/a` at or above one.
    pub fn alpha_hi(&self) -> Option<f64> {
        self.hi.map(|b| b.alpha)
    }

    /// Largest cell ratio `b/a` at or below one.
    pub fn alpha_lo(&self) -> Option<f64> {
        self.lo.map(|b| b.alpha)
    }

    /// Geometric membership test against the four boundary lines.
    pub fn contains(&self, c: f64, d: f64) -> bool {
        let tol = |b: &Bound| BOUNDARY_TOL / b.scale;
        let hi_ok = self.hi.as_ref().is_none_or(|h| {
            c - h.alpha * d <= tol(h) && (1.0 - c) - h.alpha * (1.0 - d) <= tol(h)
        });
        let lo_ok = self.lo.as_ref().is_none_or(|l| {
            c - l.alpha * d >= -tol(l) && (1.0 - c) - l.alpha * (1.0 - d) >= -tol(l)
        });
        hi_ok && lo_ok
    }

    /// The boundary lines clipped to the unit square: `c = α·d` runs from the
    /// origin, `1 − c = α·(1 − d)` from `(1, 1)`.
    pub fn boundary_segments(&self) -> Vec<Segment> {
        let mut out = Vec::with_capacity(4);
        for alpha in [self.alpha_lo(), self.alpha_hi()].into_iter().flatten() {
            let (dc, dd) = (alpha.min(1.0), (1.0 / alpha).min(1.0));
            out.push(Segment {
                from: (0.0, 0.0),
                to: (dc, dd),
            });
            out.push(Segment {
                from: (1.0, 1.0),
                to: (1.0 - dc, 1.0 - dd),
            });
        }
        out
    }

    /// Euclidean distance from `(c, d)` to the nearest boundary segment.
    pub fn distance_to_boundary(&self, c: f64, d: f64) -> f64 {
        self.boundary_segments()
            .iter()
            .map(|s| s.distance((c, d)))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Reduction of the whole list's error when adding `(c, d)`, cell by cell.
pub fn list_reduction(list: &CellList, c: f64, d: f64) -> f64 {
    list.cells()
        .iter()
        .map(|cell| reduction_closed_form(cell.a, cell.b, c, d))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Cell, EngineConfig};

    #[test]
    fn closed_form_reductions() {
        assert!((reduction_closed_form(0.3, 0.7, 0.15, 0.75) - 0.08).abs() < 1e-15);
        assert!((reduction_closed_form(0.3, 0.7, 0.90, 0.30) - 0.06).abs() < 1e-15);
        for &(a, b, c) in &[(0.3, 0.7, 0.2), (0.6, 0.1, 0.9), (0.0, 0.4, 0.5)] {
            assert!(reduction_closed_form(a, b, c, c).abs() < 1e-15);
        }
    }

    #[test]
    fn duin_test_examples() {
        assert!(no_improvement_test(0.1, 0.5, 0.1, 0.8));
        assert!(!no_improvement_test(0.1, 0.5, 0.4, 0.9));
        assert!(no_improvement_test(0.1, 0.5, 0.3, 0.3));
        assert!(no_improvement_test(0.0, 0.5, 0.9, 0.1));
    }

    #[test]
    fn zero_denominators() {
        // d = 0, c > 0: c/d = +inf, on the far side of any finite alpha
        assert!(!no_improvement_test(0.3, 0.7, 0.5, 0.0));
        assert!(reduction_closed_form(0.3, 0.7, 0.5, 0.0) > 0.0);
        // c = d = 0 is neutral
        assert!(no_improvement_test(0.3, 0.7, 0.0, 0.0));
        assert_eq!(reduction_closed_form(0.3, 0.7, 0.0, 0.0), 0.0);
        // c = d = 1 is neutral on the absent side
        assert!(no_improvement_test(0.3, 0.7, 1.0, 1.0));
    }

    #[test]
    fn region_of_fixture_list() {
        let list = CellList::from_cells(vec![Cell::new(0.045, 0.525), Cell::new(0.255, 0.175)], 1).unwrap();
        let r = NoImprovementRegion::of(&list).unwrap();
        assert!((r.alpha_hi().unwrap() - 0.525 / 0.045).abs() < 1e-12);
        assert!((r.alpha_lo().unwrap() - 0.175 / 0.255).abs() < 1e-12);
        assert!(r.contains(0.5, 0.5));
        assert!(!r.contains(0.9, 0.3));
    }

    #[test]
    fn region_escape_children() {
        let cfg = EngineConfig::default();
        let parent = CellList::from_cells(vec![Cell::new(0.1, 0.5)], 0).unwrap();
        let kids = parent.expand(0.4, 0.9, &cfg).unwrap();
        let a1 = kids.cells()[0].b / kids.cells()[0].a;
        let a0 = kids.cells()[1].b / kids.cells()[1].a;
        assert!((a1 - 11.25).abs() < 1e-12);
        assert!((a0 - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn undefined_region() {
        let list = CellList::from_cells(vec![Cell::new(0.5, 0.0), Cell::new(0.0, 0.5)], 1).unwrap();
        assert_eq!(NoImprovementRegion::of(&list), Err(Error::RegionUndefined));
    }

    #[test]
    fn unit_ratio_pins_diagonal() {
        let list = CellList::from_cells(vec![Cell::new(0.25, 0.25), Cell::new(0.1, 0.4)], 1).unwrap();
        let r = NoImprovementRegion::of(&list).unwrap();
        assert_eq!(r.alpha_hi(), Some(1.0));
        assert_eq!(r.alpha_lo(), Some(1.0));
        assert!(r.contains(0.3, 0.3));
        assert!(!r.contains(0.3, 0.31));
    }

    #[test]
    fn segment_distance() {
        let s = Segment {
            from: (0.0, 0.0),
            to: (1.0, 0.0),
        };
        assert_eq!(s.distance((0.5, 0.25)), 0.25);
        assert_eq!(s.distance((2.0, 0.0)), 1.0);
    }
}
