use serde::{Deserialize, Serialize};
use std::sync::{Arc, OnceLock};

use super::{DensitySpec, MeasureError};
use crate::geom::{polygon, quad, Point2};

/// Uniform bucket grid over a point cloud for range queries.
#[derive(Debug)]
struct PointIndex {
    lo: Point2,
    step: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl PointIndex {
    fn new(points: &[Point2]) -> Self {
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let span = (hi - lo).max().max(1e-12);
        let per_side = ((points.len() as f64).sqrt().ceil() as usize).max(1);
        let step = span / per_side as f64 * (1.0 + 1e-9);
        let nx = (((hi.x - lo.x) / step).floor() as usize + 1).max(1);
        let ny = (((hi.y - lo.y) / step).floor() as usize + 1).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        for (i, p) in points.iter().enumerate() {
            let (bx, by) = Self::bucket_of(lo, step, nx, ny, p);
            buckets[by * nx + bx].push(i);
        }
        PointIndex { lo, step, nx, ny, buckets }
    }

    fn bucket_of(lo: Point2, step: f64, nx: usize, ny: usize, p: &Point2) -> (usize, usize) {
        let bx = (((p.x - lo.x) / step).floor().max(0.0) as usize).min(nx - 1);
        let by = (((p.y - lo.y) / step).floor().max(0.0) as usize).min(ny - 1);
        (bx, by)
    }

    fn for_each_in_box<F: FnMut(usize)>(&self, blo: Point2, bhi: Point2, mut f: F) {
        let x0 = ((blo.x - self.lo.x) / self.step).floor();
        let y0 = ((blo.y - self.lo.y) / self.step).floor();
        let x1 = ((bhi.x - self.lo.x) / self.step).floor();
        let y1 = ((bhi.y - self.lo.y) / self.step).floor();
        if x1 < 0.0 || y1 < 0.0 || x0 > (self.nx - 1) as f64 || y0 > (self.ny - 1) as f64 {
            return;
        }
        let x0 = x0.max(0.0) as usize;
        let y0 = y0.max(0.0) as usize;
        let x1 = (x1 as usize).min(self.nx - 1);
        let y1 = (y1 as usize).min(self.ny - 1);
        for by in y0..=y1 {
            for bx in x0..=x1 {
                for &i in &self.buckets[by * self.nx + bx] {
                    f(i);
                }
            }
        }
    }
}

/// Weighted point cloud approximating a density at scale `δ`.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure {
    points: Vec<Point2>,
    weights: Vec<f64>,
    delta: f64,
    parent: Option<DensitySpec>,
    cells: Option<Arc<Vec<Vec<Point2>>>>,
    index: Arc<OnceLock<PointIndex>>,
}

#[derive(Serialize, Deserialize)]
struct MeasureFile {
    delta: f64,
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Validates positivity and unit total mass (within 1e-12).
    pub fn new(points: Vec<Point2>, weights: Vec<f64>, delta: f64) -> Result<Self, MeasureError> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(MeasureError::InvalidWeights("points and weights must be nonempty and of equal length".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(MeasureError::InvalidWeights("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MeasureError::InvalidWeights(format!("total mass {total} differs from 1")));
        }
        Ok(DiscreteMeasure { points, weights, delta, parent: None, cells: None, index: Arc::new(OnceLock::new()) })
    }

    /// Rescales positive weights to unit mass.
    pub fn normalized(points: Vec<Point2>, weights: Vec<f64>, delta: f64) -> Result<Self, MeasureError> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(MeasureError::InvalidWeights("zero total mass".into()));
        }
        Self::new(points, weights.iter().map(|w| w / total).collect(), delta)
    }

    pub fn dirac(p: Point2) -> Self {
        Self::new(vec![p], vec![1.0], 0.0).expect("dirac")
    }

    pub(crate) fn with_parent(mut self, parent: DensitySpec, cells: Vec<Vec<Point2>>) -> Self {
        self.parent = Some(parent);
        self.cells = Some(Arc::new(cells));
        self
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn parent(&self) -> Option<&DensitySpec> {
        self.parent.as_ref()
    }

    /// Voronoi cells (clipped to the parent domain) when produced by discretization.
    pub fn cells(&self) -> Option<&[Vec<Point2>]> {
        self.cells.as_deref().map(|v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn index(&self) -> &PointIndex {
        self.index.get_or_init(|| PointIndex::new(&self.points))
    }

    pub fn mass_disk(&self, c: &Point2, r: f64) -> f64 {
        let mut s = 0.0;
        let rr = r * r;
        self.index().for_each_in_box(c - Point2::new(r, r), c + Point2::new(r, r), |i| {
            if (self.points[i] - c).norm_squared() <= rr {
                s += self.weights[i];
            }
        });
        s
    }

    pub fn mass_ellipse(&self, c: &Point2, a: f64, b: f64, angle: f64) -> f64 {
        let (sn, co) = angle.sin_cos();
        let mut s = 0.0;
        self.index().for_each_in_box(c - Point2::new(a, a), c + Point2::new(a, a), |i| {
            let d = self.points[i] - c;
            let u = (co * d.x + sn * d.y) / a;
            let v = (-sn * d.x + co * d.y) / b;
            if u * u + v * v <= 1.0 {
                s += self.weights[i];
            }
        });
        s
    }

    pub fn mass_polygon(&self, poly: &[Point2]) -> f64 {
        let mut lo = poly[0];
        let mut hi = poly[0];
        for p in poly {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let hp = polygon::edges_halfplanes(poly);
        let mut s = 0.0;
        self.index().for_each_in_box(lo, hi, |i| {
            if hp.iter().all(|(n, b)| n.dot(&self.points[i]) <= *b) {
                s += self.weights[i];
            }
        });
        s
    }

    /// Indices of points within distance `r` of `c`.
    pub fn points_in_disk(&self, c: &Point2, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.index().for_each_in_box(c - Point2::new(r, r), c + Point2::new(r, r), |i| {
            if (self.points[i] - c).norm() <= r {
                out.push(i);
            }
        });
        out.sort_unstable();
        out
    }

    /// Max distance from a cell point to its site.
    pub fn covering_radius(&self) -> Option<f64> {
        let cells = self.cells()?;
        Some(
            cells
                .iter()
                .zip(&self.points)
                .map(|(c, p)| c.iter().map(|v| (v - p).norm()).fold(0.0, f64::max))
                .fold(0.0, f64::max),
        )
    }

    /// `(Σ_i ∫_{V_i} |x − x_i|² dμ)^{1/2}`: cost of the coupling that sends each cell to its site.
    pub fn site_coupling_w2(&self) -> Option<f64> {
        let cells = self.cells()?;
        let parent = self.parent.as_ref()?;
        let mut total = 0.0;
        for (c, p) in cells.iter().zip(&self.points) {
            total += quad::polygon(c, &|x: &Point2| (x - p).norm_squared() * parent.value_unchecked(x));
        }
        Some(total.max(0.0).sqrt())
    }

    pub fn translate(&self, v: &Point2) -> DiscreteMeasure {
        let mut m = DiscreteMeasure {
            points: self.points.iter().map(|p| p + v).collect(),
            weights: self.weights.clone(),
            delta: self.delta,
            parent: self.parent.as_ref().map(|d| d.translate(v)),
            cells: self
                .cells
                .as_ref()
                .map(|cs| Arc::new(cs.iter().map(|c| c.iter().map(|p| p + v).collect()).collect())),
            index: Arc::new(OnceLock::new()),
        };
        m.index = Arc::new(OnceLock::new());
        m
    }

    /// Relabels points: new index `k` holds old index `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> DiscreteMeasure {
        DiscreteMeasure {
            points: perm.iter().map(|&i| self.points[i]).collect(),
            weights: perm.iter().map(|&i| self.weights[i]).collect(),
            delta: self.delta,
            parent: self.parent.clone(),
            cells: self.cells.as_ref().map(|cs| Arc::new(perm.iter().map(|&i| cs[i].clone()).collect())),
            index: Arc::new(OnceLock::new()),
        }
    }

    pub fn to_json(&self) -> String {
        let f = MeasureFile {
            delta: self.delta,
            points: self.points.iter().map(|p| [p.x, p.y]).collect(),
            weights: self.weights.clone(),
        };
        serde_json::to_string(&f).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self, MeasureError> {
        let f: MeasureFile = serde_json::from_str(s).map_err(|e| MeasureError::InvalidWeights(e.to_string()))?;
        Self::new(f.points.iter().map(|p| Point2::new(p[0], p[1])).collect(), f.weights, f.delta)
    }
}
