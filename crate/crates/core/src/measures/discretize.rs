use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{DensitySpec, DiscreteMeasure, MeasureError};
use crate::geom::{cells::voronoi_cells, Point2, Polygon};
use crate::rng::{seeded, Rng};

/// How discretization sites are placed before covering repair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Seeding {
    /// Cell centers of the axis grid of spacing `δ` anchored at the domain's lower-left corner.
    Grid,
    /// Grid sites moved by up to `0.2δ` per coordinate.
    JitteredGrid { seed: u64 },
    /// Dart throwing with minimum separation `0.9δ`.
    Poisson { seed: u64 },
}

fn bbox(domain: &Polygon) -> (Point2, Point2) {
    let v = domain.vertices();
    v.iter().fold((v[0], v[0]), |(lo, hi), p| (lo.inf(p), hi.sup(p)))
}

fn grid_sites(domain: &Polygon, h: f64) -> Vec<Point2> {
    let (lo, hi) = bbox(domain);
    let nx = ((hi.x - lo.x) / h).ceil() as usize;
    let ny = ((hi.y - lo.y) / h).ceil() as usize;
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let p = lo + Point2::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            if domain.contains_point(&p, 0.0) {
                out.push(p);
            }
        }
    }
    out
}

fn poisson_sites(domain: &Polygon, r: f64, rng: &mut Rng) -> Vec<Point2> {
    let (lo, hi) = bbox(domain);
    let step = r / 2f64.sqrt();
    let nx = ((hi.x - lo.x) / step).ceil() as usize + 1;
    let ny = ((hi.y - lo.y) / step).ceil() as usize + 1;
    let mut grid: Vec<Option<usize>> = vec![None; nx * ny];
    let key = |p: &Point2| (((p.x - lo.x) / step) as usize, ((p.y - lo.y) / step) as usize);
    let mut pts: Vec<Point2> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    let far_enough = |p: &Point2, pts: &[Point2], grid: &[Option<usize>]| {
        let (gx, gy) = key(p);
        for y in gy.saturating_sub(2)..(gy + 3).min(ny) {
            for x in gx.saturating_sub(2)..(gx + 3).min(nx) {
                if let Some(k) = grid[y * nx + x] {
                    if (pts[k] - p).norm() < r {
                        return false;
                    }
                }
            }
        }
        true
    };
    let start = loop {
        let p = Point2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        if domain.contains_point(&p, 0.0) {
            break p;
        }
    };
    let (gx, gy) = key(&start);
    grid[gy * nx + gx] = Some(0);
    pts.push(start);
    active.push(0);
    while !active.is_empty() {
        let slot = rng.random_range(0..active.len());
        let base = pts[active[slot]];
        let mut placed = false;
        for _ in 0..30 {
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let d = rng.random_range(r..2.0 * r);
            let p = base + Point2::new(a.cos(), a.sin()) * d;
            if !domain.contains_point(&p, 0.0) || !far_enough(&p, &pts, &grid) {
                continue;
            }
            let (gx, gy) = key(&p);
            grid[gy * nx + gx] = Some(pts.len());
            active.push(pts.len());
            pts.push(p);
            placed = true;
            break;
        }
        if !placed {
            active.swap_remove(slot);
        }
    }
    pts
}

/// Voronoi discretization `μ_δ = Σ f_i δ_{x_i}` with `f_i = μ(V_i)` and covering radius at most `δ`.
pub fn discretize(density: &DensitySpec, delta: f64, seeding: Seeding) -> Result<DiscreteMeasure, MeasureError> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(MeasureError::DeltaTooLarge(delta));
    }
    let domain = density.domain();
    let mut sites = match seeding {
        Seeding::Grid => grid_sites(domain, delta),
        Seeding::JitteredGrid { seed } => {
            let mut rng = seeded(seed, 1);
            grid_sites(domain, delta)
                .into_iter()
                .map(|p| {
                    let q = p + Point2::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)) * delta;
                    if domain.contains_point(&q, 0.0) {
                        q
                    } else {
                        p
                    }
                })
                .collect()
        }
        Seeding::Poisson { seed } => poisson_sites(domain, 0.9 * delta, &mut seeded(seed, 2)),
    };
    if sites.len() < 4 {
        return Err(MeasureError::DeltaTooLarge(delta));
    }
    let window = domain.ring();
    let mut cells;
    let mut rounds = 0;
    loop {
        cells = voronoi_cells(&sites, window);
        let mut far: Vec<(f64, Point2)> = Vec::new();
        for (c, s) in cells.iter().zip(&sites) {
            if let Some((d, v)) = c.poly.iter().map(|v| ((v - s).norm(), *v)).max_by(|a, b| a.0.total_cmp(&b.0)) {
                if d > delta {
                    far.push((d, v));
                }
            }
        }
        if far.is_empty() {
            break;
        }
        rounds += 1;
        if rounds > 64 {
            return Err(MeasureError::DeltaTooLarge(delta));
        }
        far.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut added: Vec<Point2> = Vec::new();
        for (_, v) in far {
            if added.iter().all(|a| (a - v).norm() > 0.5 * delta) {
                added.push(v);
            }
        }
        sites.extend(added);
    }
    // cells of zero area carry no mass and are dropped with their sites
    let mut pts = Vec::with_capacity(sites.len());
    let mut weights = Vec::with_capacity(sites.len());
    let mut rings = Vec::with_capacity(sites.len());
    for (c, s) in cells.into_iter().zip(sites) {
        if c.poly.len() < 3 {
            continue;
        }
        let w = density.mass_polygon(&c.poly);
        if w > 0.0 {
            pts.push(s);
            weights.push(w);
            rings.push(c.poly);
        }
    }
    if pts.len() < 4 {
        return Err(MeasureError::DeltaTooLarge(delta));
    }
    Ok(DiscreteMeasure::normalized(pts, weights, delta)?.with_parent(density.clone(), rings))
}
