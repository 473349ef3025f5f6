use serde::{Deserialize, Serialize};

use super::Section;
use crate::geom::{polygon, Point2};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VitaliOutcome {
    /// Indices of the kept sections, in selection order.
    pub selected: Vec<usize>,
    pub cstar: f64,
    /// `|∪S_i \ ∪ C*S_kept|`.
    pub uncovered_area: f64,
    /// `|∪S_i|`.
    pub union_area: f64,
}

impl VitaliOutcome {
    pub fn covered(&self) -> bool {
        self.uncovered_area <= 1e-9 * self.union_area.max(1e-300)
    }
}

/// Greedy disjoint subfamily in decreasing height.
fn greedy(sections: &[Section]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sections.len()).collect();
    order.sort_by(|&a, &b| sections[b].t.total_cmp(&sections[a].t).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let ring = sections[i].vertices();
        if kept.iter().all(|&k| !polygon::intersects(sections[k].vertices(), ring, 0.0)) {
            kept.push(i);
        }
    }
    kept
}

fn uncovered(sections: &[Section], kept: &[usize], cstar: f64) -> f64 {
    let dilated: Vec<Vec<Point2>> = kept.iter().map(|&k| sections[k].dilated(cstar).vertices().to_vec()).collect();
    let mut both = dilated.clone();
    both.extend(sections.iter().map(|s| s.vertices().to_vec()));
    let cover = polygon::union_area(&dilated);
    (polygon::union_area(&both) - cover).max(0.0)
}

/// Greedy selection and the uncovered area at a given `C*` (dilations about each centre `x0`).
pub fn vitali_select(sections: &[Section], cstar: f64) -> VitaliOutcome {
    let selected = greedy(sections);
    let all: Vec<Vec<Point2>> = sections.iter().map(|s| s.vertices().to_vec()).collect();
    let union_area = polygon::union_area(&all);
    let uncovered_area = uncovered(sections, &selected, cstar);
    VitaliOutcome { selected, cstar, uncovered_area, union_area }
}

/// Smallest `C*` (relative precision 1e-3) for which the greedy subfamily covers the family.
pub fn vitali_constant(sections: &[Section]) -> VitaliOutcome {
    let selected = greedy(sections);
    let all: Vec<Vec<Point2>> = sections.iter().map(|s| s.vertices().to_vec()).collect();
    let union_area = polygon::union_area(&all);
    let tol = 1e-9 * union_area.max(1e-300);
    let ok = |c: f64| uncovered(sections, &selected, c) <= tol;
    let (mut lo, mut hi) = (1.0, 2.0);
    if ok(lo) {
        hi = lo;
    } else {
        while !ok(hi) && hi < 1e6 {
            lo = hi;
            hi *= 2.0;
        }
        while hi - lo > 1e-3 * lo {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let uncovered_area = uncovered(sections, &selected, hi);
    VitaliOutcome { selected, cstar: hi, uncovered_area, union_area }
}
