//! Cells of a maximum of affine functions `max_j (x·y_j − φ_j)` clipped to a convex window.
//!
//! Voronoi cells are the special case `y_j = x_j`, `φ_j = |x_j|²/2`.

use rayon::prelude::*;

use super::polygon::{self, centroid};
use super::Point2;

/// Edge labels at or above this value name edges of the clipping window.
pub const WINDOW_LABEL: usize = usize::MAX / 2;

#[derive(Clone, Debug, Default)]
pub struct Cell {
    /// Counter-clockwise ring; empty when the piece is nowhere maximal in the window.
    pub poly: Vec<Point2>,
    /// `labels[i]` names the piece across edge `poly[i] → poly[i+1]`, or a window edge.
    pub labels: Vec<usize>,
}

impl Cell {
    pub fn area(&self) -> f64 {
        polygon::area(&self.poly)
    }

    pub fn touches_window(&self) -> bool {
        self.labels.iter().any(|&l| l >= WINDOW_LABEL)
    }
}

fn cell_of(j: usize, slopes: &[Point2], phi: &[f64], window: &[Point2], first: &[usize]) -> Cell {
    let mut poly = window.to_vec();
    let mut labels: Vec<usize> = (0..window.len()).map(|e| WINDOW_LABEL + e).collect();
    let yj = slopes[j];
    let clip_by = |k: usize, poly: &mut Vec<Point2>, labels: &mut Vec<usize>, c: &Point2, rad: f64| {
        let a = slopes[k] - yj;
        let b = phi[k] - phi[j];
        let an = a.norm();
        if an == 0.0 {
            if b < 0.0 {
                // same slope, strictly larger piece everywhere
                poly.clear();
                labels.clear();
            }
            return;
        }
        if c.dot(&a) + rad * an <= b {
            return;
        }
        let (p, l) = polygon::clip_labeled(poly, labels, &a, b, k);
        *poly = p;
        *labels = l;
    };
    let bound = |poly: &[Point2]| {
        let c = centroid(poly);
        let rad = poly.iter().map(|v| (v - c).norm()).fold(0.0, f64::max) * (1.0 + 1e-12);
        (c, rad)
    };
    for &k in first {
        if k == j || poly.len() < 3 {
            continue;
        }
        let (c, rad) = bound(&poly);
        clip_by(k, &mut poly, &mut labels, &c, rad);
    }
    let (mut c, mut rad) = bound(&poly);
    for k in 0..slopes.len() {
        if k == j || poly.len() < 3 {
            continue;
        }
        let before = poly.len();
        clip_by(k, &mut poly, &mut labels, &c, rad);
        if poly.len() != before || poly.len() < 3 {
            if poly.len() < 3 {
                break;
            }
            (c, rad) = bound(&poly);
        }
    }
    // ties between identical pieces: the lower index keeps the cell
    if poly.len() >= 3 {
        for k in 0..j {
            if slopes[k] == yj && phi[k] == phi[j] {
                poly.clear();
                labels.clear();
                break;
            }
        }
    }
    if poly.len() < 3 {
        poly.clear();
        labels.clear();
    }
    Cell { poly, labels }
}

/// All cells, computed in parallel. `window` must be a counter-clockwise convex polygon.
pub fn max_affine_cells(slopes: &[Point2], phi: &[f64], window: &[Point2]) -> Vec<Cell> {
    assert_eq!(slopes.len(), phi.len());
    let n = slopes.len();
    (0..n)
        .into_par_iter()
        .map(|j| {
            // likely neighbours first: closest slopes
            let mut idx: Vec<usize> = (0..n).filter(|&k| k != j).collect();
            let near = 24.min(idx.len());
            if near > 0 && near < idx.len() {
                idx.select_nth_unstable_by(near - 1, |&a, &b| {
                    (slopes[a] - slopes[j]).norm_squared().total_cmp(&(slopes[b] - slopes[j]).norm_squared())
                });
            }
            idx.truncate(near);
            cell_of(j, slopes, phi, window, &idx)
        })
        .collect()
}

/// Voronoi cells of `sites` clipped to `window`.
pub fn voronoi_cells(sites: &[Point2], window: &[Point2]) -> Vec<Cell> {
    let phi: Vec<f64> = sites.iter().map(|p| 0.5 * p.norm_squared()).collect();
    max_affine_cells(sites, &phi, window)
}
